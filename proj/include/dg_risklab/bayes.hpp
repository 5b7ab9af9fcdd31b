#pragma once

// Bayes classifiers and risks for the three information settings:
//   pool : predict from x
//   dg   : predict from (x, m)   (observable metadata)
//   full : predict from (x, d)   (true domain)
// plus the margin-based sandwich bounds on the gaps between them and the
// posterior-drift / covariate-shift certificates.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "dg_risklab/distribution.hpp"
#include "dg_risklab/error.hpp"
#include "json.hpp"

namespace dg_risklab {

/// Bayes decision on one posterior: argmax (ties to the smallest class) and the margin
/// max - 2nd max (0 when the top two agree within kStructuralTol).
struct Decision {
  ClassIndex label = 0;
  double margin = 0.0;
};

inline Decision decide(std::span<const double> post) {
  double top = post[0];
  for (double v : post) top = std::max(top, v);
  Decision out;
  for (ClassIndex k = 0; k < post.size(); ++k)
    if (post[k] >= top - kStructuralTol) {
      out.label = k;
      break;
    }
  std::vector<double> sorted(post.begin(), post.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double diff = sorted[0] - sorted[1];
  out.margin = diff <= kStructuralTol ? 0.0 : diff;
  return out;
}

/// Lookup-table Bayes classifiers. Cells with zero marginal mass hold std::nullopt.
struct BayesSolution {
  std::size_t nx = 0, ny = 0, nm = 0, nd = 0;

  std::vector<double> p_x;    // [x]
  std::vector<double> p_xm;   // [x * nm + m]
  std::vector<double> p_xd;   // [x * nd + d]
  std::vector<double> post_x;   // [x * K + y]
  std::vector<double> post_xm;  // [(x * nm + m) * K + y]
  std::vector<double> post_xd;  // [(x * nd + d) * K + y]

  std::vector<std::optional<ClassIndex>> f_pool;  // [x]
  std::vector<std::optional<ClassIndex>> f_dg;    // [x * nm + m]
  std::vector<std::optional<ClassIndex>> f_full;  // [x * nd + d]
  std::vector<std::optional<double>> margin_xm;   // gamma(x, m)
  std::vector<std::optional<double>> margin_xd;   // gamma~(x, d)

  std::optional<ClassIndex> pool(std::size_t x) const { return f_pool[x]; }
  std::optional<ClassIndex> dg(std::size_t x, std::size_t m) const { return f_dg[x * nm + m]; }
  std::optional<ClassIndex> full(std::size_t x, std::size_t d) const { return f_full[x * nd + d]; }
  std::optional<double> gamma(std::size_t x, std::size_t m) const { return margin_xm[x * nm + m]; }
  std::optional<double> gamma_full(std::size_t x, std::size_t d) const { return margin_xd[x * nd + d]; }

  std::span<const double> posterior_x(std::size_t x) const { return {post_x.data() + x * ny, ny}; }
  std::span<const double> posterior_xm(std::size_t x, std::size_t m) const {
    return {post_xm.data() + (x * nm + m) * ny, ny};
  }
  std::span<const double> posterior_xd(std::size_t x, std::size_t d) const {
    return {post_xd.data() + (x * nd + d) * ny, ny};
  }
};

inline BayesSolution solve_bayes(const JointTable& j) {
  const Support& s = j.support();
  BayesSolution b;
  b.nx = s.nx();
  b.ny = s.ny();
  b.nm = s.nm();
  b.nd = s.nd();
  const std::size_t K = b.ny;

  b.p_x.assign(b.nx, 0.0);
  b.p_xm.assign(b.nx * b.nm, 0.0);
  b.p_xd.assign(b.nx * b.nd, 0.0);
  std::vector<double> m_x(b.nx * K, 0.0), m_xm(b.nx * b.nm * K, 0.0), m_xd(b.nx * b.nd * K, 0.0);
  for (std::size_t x = 0; x < b.nx; ++x)
    for (ClassIndex y = 0; y < K; ++y)
      for (std::size_t m = 0; m < b.nm; ++m)
        for (std::size_t d = 0; d < b.nd; ++d) {
          const double v = j(x, y, m, d);
          m_x[x * K + y] += v;
          m_xm[(x * b.nm + m) * K + y] += v;
          m_xd[(x * b.nd + d) * K + y] += v;
        }

  // Normalizes each K-block of `mass` into `post`, records the block mass, and decides.
  auto settle = [K](const std::vector<double>& mass, std::vector<double>& block_mass, std::vector<double>& post,
                    std::vector<std::optional<ClassIndex>>* labels, std::vector<std::optional<double>>* margins) {
    const std::size_t n = block_mass.size();
    post.assign(n * K, 0.0);
    if (labels) labels->assign(n, std::nullopt);
    if (margins) margins->assign(n, std::nullopt);
    for (std::size_t c = 0; c < n; ++c) {
      double total = 0.0;
      for (std::size_t y = 0; y < K; ++y) total += mass[c * K + y];
      block_mass[c] = total;
      if (!(total > 0.0)) continue;
      for (std::size_t y = 0; y < K; ++y) post[c * K + y] = mass[c * K + y] / total;
      const auto dec = decide(std::span<const double>(post.data() + c * K, K));
      if (labels) (*labels)[c] = dec.label;
      if (margins) (*margins)[c] = dec.margin;
    }
  };
  settle(m_x, b.p_x, b.post_x, &b.f_pool, nullptr);
  settle(m_xm, b.p_xm, b.post_xm, &b.f_dg, &b.margin_xm);
  settle(m_xd, b.p_xd, b.post_xd, &b.f_full, &b.margin_xd);
  return b;
}

struct Bounds {
  double lower = 0.0;
  double upper = 0.0;
};

struct DisagreementEstimate {
  double direct = 0.0;    // double sum over (m, m')
  double identity = 0.0;  // E_X[1 - sum_k pi_k(X)^2]
  double value() const noexcept { return direct; }
};

/// Lower: E[gamma(X,M) 1{f_pool(X) != f_dg(X,M)}]. Upper: P(f_pool(X) != f_dg(X,M)).
inline Bounds thm1_bounds(const JointTable& /*j*/, const BayesSolution& b) {
  Bounds out;
  for (std::size_t x = 0; x < b.nx; ++x)
    for (std::size_t m = 0; m < b.nm; ++m) {
      const double w = b.p_xm[x * b.nm + m];
      if (!(w > 0.0)) continue;
      if (*b.dg(x, m) != *b.pool(x)) {
        out.lower += w * *b.gamma(x, m);
        out.upper += w;
      }
    }
  return out;
}

/// Lower: E[gamma~(X,D) 1{f_full(X,D) != f_dg(X,M)}]. Upper: P(f_full(X,D) != f_dg(X,M)).
inline Bounds thm3_bounds(const JointTable& j, const BayesSolution& b) {
  Bounds out;
  for (std::size_t x = 0; x < b.nx; ++x)
    for (std::size_t m = 0; m < b.nm; ++m)
      for (std::size_t d = 0; d < b.nd; ++d) {
        double w = 0.0;
        for (ClassIndex y = 0; y < b.ny; ++y) w += j(x, y, m, d);
        if (!(w > 0.0)) continue;
        if (*b.full(x, d) != *b.dg(x, m)) {
          out.lower += w * *b.gamma_full(x, d);
          out.upper += w;
        }
      }
  return out;
}

/// P(f_dg(X,M) != f_dg(X,M')) with M, M' iid from P(M|X), computed by the direct double sum
/// and by 1 - sum_k pi_k^2. Throws ConsistencyError if the two routes disagree beyond 1e-12.
inline DisagreementEstimate epsilon_disagreement(const JointTable& /*j*/, const BayesSolution& b) {
  DisagreementEstimate out;
  std::vector<double> pi(b.ny);
  for (std::size_t x = 0; x < b.nx; ++x) {
    const double px = b.p_x[x];
    if (!(px > 0.0)) continue;
    double direct = 0.0;
    for (std::size_t m = 0; m < b.nm; ++m) {
      const double pm = b.p_xm[x * b.nm + m] / px;
      if (!(pm > 0.0)) continue;
      for (std::size_t m2 = 0; m2 < b.nm; ++m2) {
        const double pm2 = b.p_xm[x * b.nm + m2] / px;
        if (!(pm2 > 0.0)) continue;
        if (*b.dg(x, m) != *b.dg(x, m2)) direct += pm * pm2;
      }
    }
    std::fill(pi.begin(), pi.end(), 0.0);
    for (std::size_t m = 0; m < b.nm; ++m) {
      const double pm = b.p_xm[x * b.nm + m] / px;
      if (pm > 0.0) pi[*b.dg(x, m)] += pm;
    }
    double sq = 0.0;
    for (double v : pi) sq += v * v;
    out.direct += px * direct;
    out.identity += px * (1.0 - sq);
  }
  if (std::abs(out.direct - out.identity) > kStructuralTol)
    throw ConsistencyError("epsilon_disagreement: direct sum " + std::to_string(out.direct) +
                           " disagrees with 1 - sum pi^2 identity " + std::to_string(out.identity));
  return out;
}

struct RiskReport {
  double r_pool = 0.0;
  double r_dg = 0.0;
  double r_full = 0.0;
  double gap_pool_dg = 0.0;
  double gap_dg_full = 0.0;
  double thm1_lower = 0.0;
  double thm1_upper = 0.0;
  double thm3_lower = 0.0;
  double thm3_upper = 0.0;
  double disagreement_prob_pool_dg = 0.0;
  double disagreement_prob_full_dg = 0.0;
  double epsilon_hat = 0.0;
  double gamma_min = 0.0;  // over (x, m) with P(x, m) > 0
  std::size_t zero_mass_xm_cells = 0;

  /// Smallest slack over the hierarchy and both sandwiches; negative means a violation.
  double hierarchy_slack() const { return std::min(r_pool - r_dg, r_dg - r_full); }
  double thm1_slack() const { return std::min(gap_pool_dg - thm1_lower, thm1_upper - gap_pool_dg); }
  double thm3_slack() const { return std::min(gap_dg_full - thm3_lower, thm3_upper - gap_dg_full); }
};

inline RiskReport risks(const JointTable& j, const BayesSolution& b) {
  RiskReport r;
  for (std::size_t x = 0; x < b.nx; ++x) {
    if (b.p_x[x] > 0.0) r.r_pool += b.p_x[x] * (1.0 - b.posterior_x(x)[*b.pool(x)]);
    for (std::size_t m = 0; m < b.nm; ++m) {
      const double w = b.p_xm[x * b.nm + m];
      if (w > 0.0)
        r.r_dg += w * (1.0 - b.posterior_xm(x, m)[*b.dg(x, m)]);
      else
        ++r.zero_mass_xm_cells;
    }
    for (std::size_t d = 0; d < b.nd; ++d) {
      const double w = b.p_xd[x * b.nd + d];
      if (w > 0.0) r.r_full += w * (1.0 - b.posterior_xd(x, d)[*b.full(x, d)]);
    }
  }
  r.gap_pool_dg = r.r_pool - r.r_dg;
  r.gap_dg_full = r.r_dg - r.r_full;

  const auto t1 = thm1_bounds(j, b);
  const auto t3 = thm3_bounds(j, b);
  r.thm1_lower = t1.lower;
  r.thm1_upper = t1.upper;
  r.thm3_lower = t3.lower;
  r.thm3_upper = t3.upper;
  r.disagreement_prob_pool_dg = t1.upper;
  r.disagreement_prob_full_dg = t3.upper;
  r.epsilon_hat = epsilon_disagreement(j, b).value();

  r.gamma_min = 1.0;
  for (std::size_t c = 0; c < b.p_xm.size(); ++c)
    if (b.p_xm[c] > 0.0) r.gamma_min = std::min(r.gamma_min, *b.margin_xm[c]);
  return r;
}

inline nlohmann::ordered_json to_json(const RiskReport& r) {
  return {
      {"r_pool", r.r_pool},
      {"r_dg", r.r_dg},
      {"r_full", r.r_full},
      {"gap_pool_dg", r.gap_pool_dg},
      {"gap_dg_full", r.gap_dg_full},
      {"thm1_lower", r.thm1_lower},
      {"thm1_upper", r.thm1_upper},
      {"thm3_lower", r.thm3_lower},
      {"thm3_upper", r.thm3_upper},
      {"disagreement_prob_pool_dg", r.disagreement_prob_pool_dg},
      {"disagreement_prob_full_dg", r.disagreement_prob_full_dg},
      {"epsilon_hat", r.epsilon_hat},
      {"gamma_min", r.gamma_min},
      {"zero_mass_xm_cells", r.zero_mass_xm_cells},
  };
}

/// Membership in the posterior-drift class Pi(gamma, epsilon), and the gap >= gamma*epsilon/2
/// guarantee that membership implies.
struct PosteriorDriftCertificate {
  bool member = false;
  bool margin_ok = false;
  bool disagreement_ok = false;
  double gamma_min = 0.0;
  double epsilon_hat = 0.0;
  double bound = 0.0;  // gamma * epsilon / 2
  double gap = 0.0;
  bool bound_holds = true;  // vacuously true for non-members
};

inline PosteriorDriftCertificate pd_class_certificate(const JointTable& j, const BayesSolution& b, double gamma,
                                                      double epsilon) {
  if (!(gamma >= 0.0 && gamma <= 1.0 && epsilon >= 0.0 && epsilon <= 1.0))
    throw UsageError("pd_class_certificate: gamma and epsilon must lie in [0, 1]");
  const auto r = risks(j, b);
  PosteriorDriftCertificate c;
  c.gamma_min = r.gamma_min;
  c.epsilon_hat = r.epsilon_hat;
  c.margin_ok = r.gamma_min >= gamma - kStructuralTol;
  c.disagreement_ok = r.epsilon_hat >= epsilon - kStructuralTol;
  c.member = c.margin_ok && c.disagreement_ok;
  c.bound = gamma * epsilon / 2.0;
  c.gap = r.gap_pool_dg;
  c.bound_holds = !c.member || c.gap >= c.bound - kStructuralTol;
  return c;
}

/// Covariate shift in the extended sense: f_dg(x, .) is constant over the m with P(x, m) > 0.
/// When it holds, the pooled and domain-informed Bayes risks must coincide.
struct CovariateShiftCertificate {
  bool covariate_shift = false;
  double abs_gap = 0.0;
  bool equality_holds = true;  // vacuously true when covariate_shift is false
};

inline CovariateShiftCertificate covariate_shift_certificate(const JointTable& j, const BayesSolution& b,
                                                             double tol) {
  CovariateShiftCertificate c;
  c.covariate_shift = true;
  for (std::size_t x = 0; x < b.nx && c.covariate_shift; ++x) {
    std::optional<ClassIndex> seen;
    for (std::size_t m = 0; m < b.nm; ++m) {
      if (!(b.p_xm[x * b.nm + m] > 0.0)) continue;
      if (seen && *seen != *b.dg(x, m)) {
        c.covariate_shift = false;
        break;
      }
      seen = b.dg(x, m);
    }
  }
  const auto r = risks(j, b);
  c.abs_gap = std::abs(r.r_pool - r.r_dg);
  c.equality_holds = !c.covariate_shift || c.abs_gap <= tol;
  return c;
}

}  // namespace dg_risklab
