#pragma once

// Named constructions and random instance factories. All outputs are FactoredDistributions,
// so every generator inherits the conditional-independence guarantee.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dg_risklab/bayes.hpp"
#include "dg_risklab/distribution.hpp"
#include "dg_risklab/error.hpp"
#include "dg_risklab/random.hpp"

namespace dg_risklab {

struct Sizes {
  std::size_t nx = 4;
  std::size_t ny = 2;
  std::size_t nm = 2;
  std::size_t nd = 2;

  void validate() const {
    if (nx < 1 || nm < 1 || nd < 1 || ny < 2) throw UsageError("sizes: need |X|,|M|,|D| >= 1 and K >= 2");
  }
};

inline std::vector<std::string> numbered_symbols(const char* prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

inline Support indexed_support(const Sizes& s) {
  Support sup;
  for (std::size_t x = 0; x < s.nx; ++x) sup.x_values.push_back(static_cast<double>(x));
  sup.y_count = s.ny;
  sup.m_values = numbered_symbols("m", s.nm);
  sup.d_values = numbered_symbols("d", s.nd);
  return sup;
}

// ---------------------------------------------------------------------------------------
// Example 1: covariate shift with disjoint supports.
//   M = D in {1, 2}, P(M = 1) = p.
//   M = 1: X uniform on the grid over [0, 2], Y = 2 iff X >= 1.
//   M = 2: X uniform on the grid over [4, 6], Y = 2 iff X >= 5.
// The grid is a + i / grid_n for i = 0..2*grid_n, threshold points take the right-limit label.

struct Example1Config {
  double p = 0.7;
  std::size_t grid_n = 200;

  void validate() const {
    if (!(p > 0.0 && p < 1.0)) throw UsageError("example1: p must lie in (0, 1)");
    if (grid_n < 2) throw UsageError("example1: grid_n must be >= 2");
  }
};

/// Closed-form values for the continuous example.
struct Example1Analytic {
  double r_pool_G = 0.0;     // best single threshold: min{p, 1-p} / 2
  double r_dg_F = 0.0;       // per-m threshold
  double r_pool_star = 0.0;  // Bayes, pooled
  double r_dg_star = 0.0;    // Bayes, domain-informed
};

struct Example1 {
  FactoredDistribution dist;
  Example1Analytic analytic;
};

inline Example1 make_example1(const Example1Config& c) {
  c.validate();
  const std::size_t per_region = 2 * c.grid_n + 1;
  Support sup;
  sup.y_count = 2;
  sup.m_values = {"1", "2"};
  sup.d_values = {"1", "2"};
  for (double base : {0.0, 4.0})
    for (std::size_t i = 0; i < per_region; ++i)
      sup.x_values.push_back(base + static_cast<double>(i) / static_cast<double>(c.grid_n));

  const std::size_t nx = sup.nx();
  std::vector<std::vector<double>> p_xy(2, std::vector<double>(nx * 2, 0.0));
  const double w = 1.0 / static_cast<double>(per_region);
  for (std::size_t region = 0; region < 2; ++region)
    for (std::size_t i = 0; i < per_region; ++i) {
      const std::size_t x = region * per_region + i;
      const ClassIndex y = i >= c.grid_n ? 1 : 0;
      p_xy[region][x * 2 + y] = w;
    }
  Example1Analytic a;
  a.r_pool_G = std::min(c.p, 1.0 - c.p) / 2.0;
  return {FactoredDistribution(std::move(sup), {c.p, 1.0 - c.p}, {{1.0, 0.0}, {0.0, 1.0}}, std::move(p_xy)), a};
}

// ---------------------------------------------------------------------------------------
// Figure 1 scenarios: two metadata values, each with a logistic posterior curve
// eta_m(x) = P(Y = 2 | x, m) = sigma(slope * (x - center)).

struct LogisticCurve {
  double slope = 1.0;
  double center = 0.0;
  double operator()(double x) const { return 1.0 / (1.0 + std::exp(-slope * (x - center))); }
};

enum class Figure1Scenario { kAgree, kDisagree };

struct Figure1Config {
  Figure1Scenario scenario = Figure1Scenario::kDisagree;
  double x_min = -3.0;
  double x_max = 3.0;
  std::size_t n_points = 121;
  LogisticCurve eta1;
  LogisticCurve eta2;

  /// Agree: sigma(x), sigma(2x), shared 1/2-crossing at 0.
  /// Disagree: sigma(x - 1), sigma(x + 1), crossings at +1 and -1.
  static Figure1Config defaults(Figure1Scenario s, std::size_t n_points = 121) {
    Figure1Config c;
    c.scenario = s;
    c.n_points = n_points;
    if (s == Figure1Scenario::kAgree) {
      c.eta1 = {1.0, 0.0};
      c.eta2 = {2.0, 0.0};
    } else {
      c.eta1 = {1.0, 1.0};
      c.eta2 = {1.0, -1.0};
    }
    return c;
  }

  void validate() const {
    if (n_points < 2) throw UsageError("figure1: need at least 2 grid points");
    if (!(x_max > x_min)) throw UsageError("figure1: x_max must exceed x_min");
  }
};

struct CurveRow {
  double x;
  double eta1;
  double eta2;
  double eta_pooled;
};

struct Figure1 {
  FactoredDistribution dist;
  std::vector<CurveRow> curves;
};

inline Figure1 make_figure1(const Figure1Config& c) {
  c.validate();
  Support sup;
  sup.y_count = 2;
  sup.m_values = {"1", "2"};
  sup.d_values = {"1", "2"};
  const double span = c.x_max - c.x_min;
  const double steps = static_cast<double>(c.n_points - 1);
  for (std::size_t i = 0; i < c.n_points; ++i)
    sup.x_values.push_back(c.x_min + span * static_cast<double>(i) / steps);

  const double w = 1.0 / static_cast<double>(c.n_points);
  std::vector<std::vector<double>> p_xy(2, std::vector<double>(c.n_points * 2, 0.0));
  for (std::size_t i = 0; i < c.n_points; ++i) {
    const double x = sup.x_values[i];
    const double e[2] = {c.eta1(x), c.eta2(x)};
    for (std::size_t m = 0; m < 2; ++m) {
      p_xy[m][i * 2 + 0] = w * (1.0 - e[m]);
      p_xy[m][i * 2 + 1] = w * e[m];
    }
  }
  FactoredDistribution dist(sup, {0.5, 0.5}, {{1.0, 0.0}, {0.0, 1.0}}, std::move(p_xy));

  const auto joint = build_joint(dist);
  std::vector<CurveRow> rows;
  for (std::size_t i = 0; i < c.n_points; ++i) {
    const double x = sup.x_values[i];
    rows.push_back({x, c.eta1(x), c.eta2(x), posterior(joint, Event{.x = i})[1]});
  }
  return {std::move(dist), std::move(rows)};
}

// ---------------------------------------------------------------------------------------

/// |X| = 1, K = 2, M = D in {1, 2} equiprobable, P(Y = 1 | d) = 0.9 / 0.1.
inline FactoredDistribution make_pd1() {
  Support sup;
  sup.x_values = {1.0};
  sup.y_count = 2;
  sup.m_values = {"1", "2"};
  sup.d_values = {"1", "2"};
  return FactoredDistribution(sup, {0.5, 0.5}, {{1.0, 0.0}, {0.0, 1.0}}, {{0.9, 0.1}, {0.1, 0.9}});
}

/// PD1 with a single uninformative metadata symbol.
inline FactoredDistribution make_pd1_constant_m() {
  Support sup;
  sup.x_values = {1.0};
  sup.y_count = 2;
  sup.m_values = {"0"};
  sup.d_values = {"1", "2"};
  return FactoredDistribution(sup, {0.5, 0.5}, {{1.0}, {1.0}}, {{0.9, 0.1}, {0.1, 0.9}});
}

/// Limits for make_random instances.
inline constexpr Sizes kRandomSizeLimits{8, 4, 4, 6};

inline FactoredDistribution make_random(const Sizes& s, std::uint64_t seed) {
  s.validate();
  if (s.nx > kRandomSizeLimits.nx || s.ny > kRandomSizeLimits.ny || s.nm > kRandomSizeLimits.nm ||
      s.nd > kRandomSizeLimits.nd)
    throw UsageError("make_random: sizes exceed |X|<=8, K<=4, |M|<=4, |D|<=6");
  Rng rng(seed);
  auto p_d = rng.simplex(s.nd);
  std::vector<std::vector<double>> p_m(s.nd), p_xy(s.nd);
  for (auto& row : p_m) row = rng.simplex(s.nm);
  for (auto& block : p_xy) block = rng.simplex(s.nx * s.ny);
  return FactoredDistribution(indexed_support(s), std::move(p_d), std::move(p_m), std::move(p_xy));
}

/// Random sizes drawn uniformly within kRandomSizeLimits, then make_random.
inline FactoredDistribution make_random_any_size(std::uint64_t seed) {
  Rng rng(splitmix64(seed ^ 0x5151));
  Sizes s;
  s.nx = rng.between(1, kRandomSizeLimits.nx);
  s.ny = rng.between(2, kRandomSizeLimits.ny);
  s.nm = rng.between(1, kRandomSizeLimits.nm);
  s.nd = rng.between(1, kRandomSizeLimits.nd);
  return make_random(s, seed);
}

/// Shared P(Y | x) across domains, domain-specific P(x | d) and P(m | d).
inline FactoredDistribution make_covariate_shift(const Sizes& s, std::uint64_t seed) {
  s.validate();
  Rng rng(seed);
  std::vector<std::vector<double>> post(s.nx);
  for (auto& row : post) row = rng.simplex(s.ny);
  auto p_d = rng.simplex(s.nd);
  std::vector<std::vector<double>> p_m(s.nd), p_xy(s.nd, std::vector<double>(s.nx * s.ny));
  for (auto& row : p_m) row = rng.simplex(s.nm);
  for (std::size_t d = 0; d < s.nd; ++d) {
    const auto p_x = rng.simplex(s.nx);
    for (std::size_t x = 0; x < s.nx; ++x)
      for (ClassIndex y = 0; y < s.ny; ++y) p_xy[d][x * s.ny + y] = p_x[x] * post[x][y];
  }
  return FactoredDistribution(indexed_support(s), std::move(p_d), std::move(p_m), std::move(p_xy));
}

struct PdMemberOptions {
  std::size_t max_retries = 64;
};

/// A certified member of the posterior-drift class Pi(gamma, epsilon).
///
/// Domain d reports metadata m = d mod |M|. Each (x, m) gets a top label from a shuffled
/// round-robin over classes (so metadata values disagree as much as K allows), and every
/// domain in the group puts mass >= (1 + gamma) / 2 on that label, which keeps the margin of
/// the mixed posterior at least gamma. P_D and P(x | d) start jittered and shrink to uniform
/// over the retries; the first certified instance is returned.
inline FactoredDistribution make_pd_member(double gamma, double epsilon, const Sizes& s, std::uint64_t seed,
                                           PdMemberOptions opt = {}) {
  s.validate();
  if (!(gamma > 0.0 && gamma <= 1.0)) throw UsageError("make_pd_member: gamma must lie in (0, 1]");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw UsageError("make_pd_member: epsilon must lie in (0, 1]");
  if (opt.max_retries < 1) throw UsageError("make_pd_member: max_retries must be >= 1");

  const double top_min = (1.0 + gamma) / 2.0;
  const Support sup = indexed_support(s);
  for (std::size_t attempt = 0; attempt < opt.max_retries; ++attempt) {
    Rng rng(derive_seed(seed, attempt));
    const double half = static_cast<double>(opt.max_retries) / 2.0;
    const double jitter = std::max(0.0, 1.0 - static_cast<double>(attempt) / half);
    auto mix = [&](std::size_t n) {
      auto v = rng.simplex(n);
      for (auto& p : v) p = (1.0 - jitter) / static_cast<double>(n) + jitter * p;
      double total = 0.0;
      for (double p : v) total += p;
      for (auto& p : v) p /= total;
      return v;
    };

    std::vector<std::vector<ClassIndex>> label(s.nx, std::vector<ClassIndex>(s.nm));
    for (std::size_t x = 0; x < s.nx; ++x) {
      const std::size_t offset = rng.below(s.ny);
      for (std::size_t m = 0; m < s.nm; ++m) label[x][m] = (m + offset) % s.ny;
      rng.shuffle(label[x]);
    }

    auto p_d = mix(s.nd);
    std::vector<std::vector<double>> p_m(s.nd, std::vector<double>(s.nm, 0.0));
    std::vector<std::vector<double>> p_xy(s.nd, std::vector<double>(s.nx * s.ny, 0.0));
    for (std::size_t d = 0; d < s.nd; ++d) {
      const std::size_t m = d % s.nm;
      p_m[d][m] = 1.0;
      const auto p_x = mix(s.nx);
      for (std::size_t x = 0; x < s.nx; ++x) {
        const ClassIndex top = label[x][m];
        const double a = top_min + (1.0 - top_min) * rng.uniform();
        const auto rest = rng.simplex(s.ny - 1);
        std::size_t r = 0;
        for (ClassIndex y = 0; y < s.ny; ++y)
          p_xy[d][x * s.ny + y] = p_x[x] * (y == top ? a : (1.0 - a) * rest[r++]);
      }
    }
    // Renormalize blocks: a + (1 - a) * sum(rest) can drift from 1 by an ulp.
    for (auto& block : p_xy) {
      double total = 0.0;
      for (double v : block) total += v;
      for (auto& v : block) v /= total;
    }

    FactoredDistribution f(sup, std::move(p_d), std::move(p_m), std::move(p_xy));
    const auto joint = build_joint(f);
    const auto bayes = solve_bayes(joint);
    if (pd_class_certificate(joint, bayes, gamma, epsilon).member) return f;
  }
  throw GenerationError("make_pd_member: no member of Pi(" + std::to_string(gamma) + ", " +
                        std::to_string(epsilon) + ") found for the requested sizes after " +
                        std::to_string(opt.max_retries) + " attempts");
}

}  // namespace dg_risklab
