#pragma once

// Two-stage training data and exact empirical risk minimizers over small function classes.
//
// Every fitter works on a list of weighted (x, m, y) points. A TrainingSet contributes
// weight 1 / (N * n_i) per sample (the domain-weighted empirical objective); a JointTable
// contributes P(x, y, m) per cell, in which case the same fitter returns the exact
// restricted-class optimum against the population.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dg_risklab/bayes.hpp"
#include "dg_risklab/distribution.hpp"
#include "dg_risklab/error.hpp"
#include "dg_risklab/random.hpp"
#include "dg_risklab/spec_format.hpp"

namespace dg_risklab {

enum class Mode { kPool, kDg };

inline const char* to_string(Mode m) { return m == Mode::kPool ? "pool" : "dg"; }

struct WeightedPoint {
  std::size_t x;
  std::size_t m;
  ClassIndex y;
  double w;
};

/// Rule for the number of samples per domain: constant, or uniform on [lo, hi].
struct SampleSizeRule {
  std::size_t lo = 1;
  std::size_t hi = 1;

  static SampleSizeRule constant(std::size_t n) { return {n, n}; }
  static SampleSizeRule uniform(std::size_t lo, std::size_t hi) { return {lo, hi}; }
  bool is_constant() const noexcept { return lo == hi; }

  void validate() const {
    if (lo < 1 || hi < lo) throw UsageError("sample size rule: need 1 <= lo <= hi");
  }
  std::size_t draw(Rng& rng) const { return is_constant() ? lo : rng.between(lo, hi); }

  /// "25" or "uniform:10:40".
  std::string describe() const {
    return is_constant() ? std::to_string(lo) : "uniform:" + std::to_string(lo) + ":" + std::to_string(hi);
  }
};

struct DomainRecord {
  std::size_t m;
  std::vector<std::pair<std::size_t, ClassIndex>> samples;  // (x index, class index)
};

struct TrainingSet {
  Support support;
  std::vector<DomainRecord> domains;
  std::uint64_t seed = 0;
  std::string source_id;
  /// Latent domain index per record. Diagnostics only; learners never see it.
  std::vector<std::size_t> hidden_domains;

  /// Weight 1 / (N * n_i) per sample.
  std::vector<WeightedPoint> weighted() const {
    std::vector<WeightedPoint> out;
    const double n_domains = static_cast<double>(domains.size());
    for (const auto& rec : domains) {
      const double w = 1.0 / (n_domains * static_cast<double>(rec.samples.size()));
      for (const auto& [x, y] : rec.samples) out.push_back({x, rec.m, y, w});
    }
    return out;
  }

  std::size_t total_samples() const {
    std::size_t n = 0;
    for (const auto& rec : domains) n += rec.samples.size();
    return n;
  }
};

inline TrainingSet sample_training_set(const FactoredDistribution& f, std::size_t n_domains,
                                       const SampleSizeRule& rule, std::uint64_t seed) {
  if (n_domains < 1) throw UsageError("sample_training_set: N must be >= 1");
  rule.validate();
  const Support& s = f.support();
  Rng rng(seed);
  TrainingSet ts;
  ts.support = s;
  ts.seed = seed;
  ts.source_id = fingerprint(f);
  ts.domains.reserve(n_domains);
  for (std::size_t i = 0; i < n_domains; ++i) {
    const std::size_t d = rng.categorical(f.p_d());
    const std::size_t m = rng.categorical(f.p_m_given_d()[d]);
    const std::size_t n = rule.draw(rng);
    DomainRecord rec{m, {}};
    rec.samples.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t cell = rng.categorical(f.p_xy_given_d()[d]);
      rec.samples.emplace_back(cell / s.ny(), cell % s.ny());
    }
    ts.domains.push_back(std::move(rec));
    ts.hidden_domains.push_back(d);
  }
  return ts;
}

/// Population weights P(x, y, m), one point per positive-mass cell.
inline std::vector<WeightedPoint> population_points(const JointTable& j) {
  const Support& s = j.support();
  std::vector<WeightedPoint> out;
  for (std::size_t x = 0; x < s.nx(); ++x)
    for (ClassIndex y = 0; y < s.ny(); ++y)
      for (std::size_t m = 0; m < s.nm(); ++m) {
        double w = 0.0;
        for (std::size_t d = 0; d < s.nd(); ++d) w += j(x, y, m, d);
        if (w > 0.0) out.push_back({x, m, y, w});
      }
  return out;
}

/// Exact risk P(f(X, M) != Y) of any predictor `f(x_index, m_index) -> ClassIndex`.
template <typename Predictor>
double population_risk(const JointTable& j, Predictor&& f) {
  const Support& s = j.support();
  double correct = 0.0;
  for (std::size_t x = 0; x < s.nx(); ++x)
    for (std::size_t m = 0; m < s.nm(); ++m) {
      const ClassIndex pred = f(x, m);
      for (std::size_t d = 0; d < s.nd(); ++d) correct += j(x, pred, m, d);
    }
  return std::clamp(1.0 - correct, 0.0, 1.0);
}

template <typename Predictor>
double empirical_risk(const std::vector<WeightedPoint>& pts, Predictor&& f) {
  double err = 0.0, total = 0.0;
  for (const auto& p : pts) {
    total += p.w;
    if (f(p.x, p.m) != p.y) err += p.w;
  }
  return total > 0.0 ? err / total : 0.0;
}

namespace detail {

/// Argmax of weighted counts, ties (within 1e-12) to the smallest class.
inline ClassIndex weighted_majority(const std::vector<double>& counts) {
  return decide(counts).label;
}

}  // namespace detail

// ---------------------------------------------------------------------------------------
// Unrestricted tabular classes: G = all maps x -> y, F = all maps (x, m) -> y.

struct TabularClassifier {
  Mode mode = Mode::kPool;
  std::size_t nx = 0, nm = 0;
  std::vector<std::optional<ClassIndex>> table;  // [x] or [x * nm + m]
  ClassIndex fallback = 0;

  ClassIndex predict(std::size_t x, std::size_t m) const {
    const auto& cell = table[mode == Mode::kPool ? x : x * nm + m];
    return cell ? *cell : fallback;
  }
  ClassIndex operator()(std::size_t x, std::size_t m) const { return predict(x, m); }
};

inline TabularClassifier fit_tabular(const std::vector<WeightedPoint>& pts, const Support& s, Mode mode) {
  if (pts.empty()) throw UsageError("fit_tabular: empty training set");
  TabularClassifier c;
  c.mode = mode;
  c.nx = s.nx();
  c.nm = s.nm();
  const std::size_t cells = mode == Mode::kPool ? s.nx() : s.nx() * s.nm();
  std::vector<double> counts(cells * s.ny(), 0.0), global(s.ny(), 0.0);
  std::vector<bool> seen(cells, false);
  for (const auto& p : pts) {
    const std::size_t cell = mode == Mode::kPool ? p.x : p.x * s.nm() + p.m;
    counts[cell * s.ny() + p.y] += p.w;
    global[p.y] += p.w;
    seen[cell] = true;
  }
  c.fallback = detail::weighted_majority(global);
  c.table.assign(cells, std::nullopt);
  std::vector<double> row(s.ny());
  for (std::size_t cell = 0; cell < cells; ++cell) {
    if (!seen[cell]) continue;
    std::copy_n(counts.begin() + static_cast<std::ptrdiff_t>(cell * s.ny()), s.ny(), row.begin());
    c.table[cell] = detail::weighted_majority(row);
  }
  return c;
}

inline TabularClassifier fit_tabular(const TrainingSet& ts, Mode mode) {
  return fit_tabular(ts.weighted(), ts.support, mode);
}

// ---------------------------------------------------------------------------------------
// One-dimensional threshold classifiers sign(x - t), binary labels only.

/// Predicts class index 1 (label 2) for x >= t when `positive`, class 0 otherwise; the
/// opposite below t. x == t takes the right-limit label.
struct ThresholdRule {
  double threshold = std::numeric_limits<double>::infinity();
  bool positive = true;

  ClassIndex predict(double x) const {
    const bool right = x >= threshold;
    return right == positive ? 1 : 0;
  }
};

namespace detail {

struct ValuePoint {
  double x;
  ClassIndex y;
  double w;
};

/// Exact 0-1 minimizer over thresholds at -inf, midpoints of consecutive distinct values,
/// and +inf, with both orientations. Ties: smallest threshold, then positive orientation.
inline std::optional<ThresholdRule> fit_rule(std::vector<ValuePoint> pts) {
  if (pts.empty()) return std::nullopt;
  std::sort(pts.begin(), pts.end(), [](const ValuePoint& a, const ValuePoint& b) { return a.x < b.x; });
  double total[2] = {0.0, 0.0};
  for (const auto& p : pts) total[p.y] += p.w;

  const double inf = std::numeric_limits<double>::infinity();
  ThresholdRule best{-inf, true};
  double best_err = std::numeric_limits<double>::infinity();
  // left[k]: weight of class k strictly left of the candidate threshold.
  double left[2] = {0.0, 0.0};
  auto consider = [&](double t) {
    const double err_pos = left[1] + (total[0] - left[0]);  // left -> 0, right -> 1
    const double err_neg = left[0] + (total[1] - left[1]);  // left -> 1, right -> 0
    if (err_pos < best_err - kStructuralTol) {
      best_err = err_pos;
      best = {t, true};
    }
    if (err_neg < best_err - kStructuralTol) {
      best_err = err_neg;
      best = {t, false};
    }
  };
  consider(-inf);
  for (std::size_t i = 0; i < pts.size();) {
    std::size_t k = i;
    while (k < pts.size() && pts[k].x == pts[i].x) {
      left[pts[k].y] += pts[k].w;
      ++k;
    }
    consider(k < pts.size() ? pts[i].x + (pts[k].x - pts[i].x) / 2.0 : inf);
    i = k;
  }
  return best;
}

inline void require_binary_scalar(const Support& s, const char* who) {
  if (s.ny() != 2) throw UsageError(std::string(who) + ": threshold classifiers need K = 2");
  for (double x : s.x_values)
    if (!std::isfinite(x)) throw UsageError(std::string(who) + ": x values must be finite real scalars");
}

}  // namespace detail

/// Pool mode: one rule. DG mode: one rule per metadata value, unseen values use the pooled rule.
struct ThresholdClassifier {
  Mode mode = Mode::kPool;
  std::vector<double> x_values;
  ThresholdRule pooled;
  std::vector<std::optional<ThresholdRule>> per_m;

  const ThresholdRule& rule_for(std::size_t m) const {
    if (mode == Mode::kDg && per_m[m]) return *per_m[m];
    return pooled;
  }
  ClassIndex predict(std::size_t x, std::size_t m) const { return rule_for(m).predict(x_values[x]); }
  ClassIndex operator()(std::size_t x, std::size_t m) const { return predict(x, m); }
};

inline ThresholdClassifier fit_threshold(const std::vector<WeightedPoint>& pts, const Support& s, Mode mode) {
  detail::require_binary_scalar(s, "fit_threshold");
  if (pts.empty()) throw UsageError("fit_threshold: empty training set");
  ThresholdClassifier c;
  c.mode = mode;
  c.x_values = s.x_values;
  std::vector<detail::ValuePoint> all;
  std::vector<std::vector<detail::ValuePoint>> by_m(s.nm());
  for (const auto& p : pts) {
    all.push_back({s.x_values[p.x], p.y, p.w});
    by_m[p.m].push_back({s.x_values[p.x], p.y, p.w});
  }
  c.pooled = *detail::fit_rule(std::move(all));
  c.per_m.assign(s.nm(), std::nullopt);
  if (mode == Mode::kDg)
    for (std::size_t m = 0; m < s.nm(); ++m) c.per_m[m] = detail::fit_rule(std::move(by_m[m]));
  return c;
}

inline ThresholdClassifier fit_threshold(const TrainingSet& ts, Mode mode) {
  return fit_threshold(ts.weighted(), ts.support, mode);
}

// ---------------------------------------------------------------------------------------
// Capacity-indexed families over k equal-width bins of [min x, max x].
//   histogram        : one label per bin (pool) or per (bin, m) (dg)
//   binned_threshold : one threshold rule per bin (pool) or per (bin, m) (dg); k = 1 is the
//                      single-threshold class of the linear example.
// Both satisfy the embedding condition: a pool member is the dg member constant in m.

enum class Family { kHistogram, kBinnedThreshold };

inline const char* to_string(Family f) { return f == Family::kHistogram ? "histogram" : "binned_threshold"; }

struct Binning {
  std::size_t k = 1;
  double lo = 0.0;
  double hi = 1.0;

  static Binning over(const Support& s, std::size_t k) {
    if (k < 1) throw UsageError("binning: capacity k must be >= 1");
    const auto [lo, hi] = std::minmax_element(s.x_values.begin(), s.x_values.end());
    return {k, *lo, *hi};
  }

  std::size_t bin(double x) const {
    if (k == 1 || !(hi > lo)) return 0;
    const double t = (x - lo) / (hi - lo) * static_cast<double>(k);
    if (t <= 0.0) return 0;
    return std::min(k - 1, static_cast<std::size_t>(t));
  }
};

struct HistogramClassifier {
  Mode mode = Mode::kPool;
  Binning binning;
  std::size_t nm = 0;
  std::vector<double> x_values;
  std::vector<std::optional<ClassIndex>> table;  // [bin] or [bin * nm + m]
  std::vector<std::optional<ClassIndex>> pooled;  // [bin], fallback for unseen (bin, m)
  ClassIndex fallback = 0;

  ClassIndex predict(std::size_t x, std::size_t m) const {
    const std::size_t b = binning.bin(x_values[x]);
    if (mode == Mode::kDg && table[b * nm + m]) return *table[b * nm + m];
    if (pooled[b]) return *pooled[b];
    return fallback;
  }
  ClassIndex operator()(std::size_t x, std::size_t m) const { return predict(x, m); }
};

inline HistogramClassifier fit_histogram(const std::vector<WeightedPoint>& pts, const Support& s, std::size_t k,
                                         Mode mode) {
  if (pts.empty()) throw UsageError("fit_histogram: empty training set");
  HistogramClassifier c;
  c.mode = mode;
  c.binning = Binning::over(s, k);
  c.nm = s.nm();
  c.x_values = s.x_values;
  const std::size_t K = s.ny();
  std::vector<double> by_bin(k * K, 0.0), by_bin_m(k * s.nm() * K, 0.0), global(K, 0.0);
  std::vector<bool> seen_bin(k, false), seen_bin_m(k * s.nm(), false);
  for (const auto& p : pts) {
    const std::size_t b = c.binning.bin(s.x_values[p.x]);
    by_bin[b * K + p.y] += p.w;
    by_bin_m[(b * s.nm() + p.m) * K + p.y] += p.w;
    global[p.y] += p.w;
    seen_bin[b] = true;
    seen_bin_m[b * s.nm() + p.m] = true;
  }
  auto majority = [K](const std::vector<double>& v, std::size_t cell) {
    return detail::weighted_majority(std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(cell * K),
                                                         v.begin() + static_cast<std::ptrdiff_t>((cell + 1) * K)));
  };
  c.fallback = detail::weighted_majority(global);
  c.pooled.assign(k, std::nullopt);
  for (std::size_t b = 0; b < k; ++b)
    if (seen_bin[b]) c.pooled[b] = majority(by_bin, b);
  c.table.assign(k * s.nm(), std::nullopt);
  if (mode == Mode::kDg)
    for (std::size_t cell = 0; cell < k * s.nm(); ++cell)
      if (seen_bin_m[cell]) c.table[cell] = majority(by_bin_m, cell);
  return c;
}

struct BinnedThresholdClassifier {
  Mode mode = Mode::kPool;
  Binning binning;
  std::size_t nm = 0;
  std::vector<double> x_values;
  std::vector<std::optional<ThresholdRule>> table;   // [bin * nm + m], dg only
  std::vector<std::optional<ThresholdRule>> pooled;  // [bin]
  ThresholdRule fallback;

  ClassIndex predict(std::size_t x, std::size_t m) const {
    const double xv = x_values[x];
    const std::size_t b = binning.bin(xv);
    if (mode == Mode::kDg && table[b * nm + m]) return table[b * nm + m]->predict(xv);
    if (pooled[b]) return pooled[b]->predict(xv);
    return fallback.predict(xv);
  }
  ClassIndex operator()(std::size_t x, std::size_t m) const { return predict(x, m); }
};

inline BinnedThresholdClassifier fit_binned_threshold(const std::vector<WeightedPoint>& pts, const Support& s,
                                                      std::size_t k, Mode mode) {
  detail::require_binary_scalar(s, "fit_binned_threshold");
  if (pts.empty()) throw UsageError("fit_binned_threshold: empty training set");
  BinnedThresholdClassifier c;
  c.mode = mode;
  c.binning = Binning::over(s, k);
  c.nm = s.nm();
  c.x_values = s.x_values;
  std::vector<std::vector<detail::ValuePoint>> by_bin(k), by_bin_m(k * s.nm());
  double global[2] = {0.0, 0.0};
  for (const auto& p : pts) {
    const double xv = s.x_values[p.x];
    const std::size_t b = c.binning.bin(xv);
    by_bin[b].push_back({xv, p.y, p.w});
    by_bin_m[b * s.nm() + p.m].push_back({xv, p.y, p.w});
    global[p.y] += p.w;
  }
  // Constant rule predicting the global majority.
  c.fallback = {std::numeric_limits<double>::infinity(), global[1] <= global[0] + kStructuralTol};
  c.pooled.assign(k, std::nullopt);
  for (std::size_t b = 0; b < k; ++b) c.pooled[b] = detail::fit_rule(std::move(by_bin[b]));
  c.table.assign(k * s.nm(), std::nullopt);
  if (mode == Mode::kDg)
    for (std::size_t cell = 0; cell < k * s.nm(); ++cell) c.table[cell] = detail::fit_rule(std::move(by_bin_m[cell]));
  return c;
}

// ---------------------------------------------------------------------------------------

struct SweepRow {
  std::size_t k = 0;
  double r_pool = 0.0;  // R_{pool, G_k}
  double r_dg = 0.0;    // R_{DG, F_k}
  double gap() const { return r_pool - r_dg; }
  bool hierarchy_holds() const { return r_pool >= r_dg - kStructuralTol; }
};

/// Restricted-class risks for each capacity in `ks` (strictly increasing). With no training
/// points the fitters run on population weights, giving the exact class optima; otherwise
/// the ERM fits on `train` are evaluated exactly against `j`. In exact mode a violation of
/// R_pool >= R_dg raises ConsistencyError.
inline std::vector<SweepRow> capacity_sweep(const JointTable& j, const std::vector<std::size_t>& ks, Family family,
                                            const std::vector<WeightedPoint>* train = nullptr) {
  if (ks.empty()) throw UsageError("capacity_sweep: ks is empty");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 1) throw UsageError("capacity_sweep: capacities must be >= 1");
    if (i > 0 && ks[i] <= ks[i - 1]) throw UsageError("capacity_sweep: ks must be strictly increasing");
  }
  const auto population = population_points(j);
  const auto& pts = train ? *train : population;
  const Support& s = j.support();
  std::vector<SweepRow> rows;
  for (std::size_t k : ks) {
    SweepRow row;
    row.k = k;
    if (family == Family::kHistogram) {
      row.r_pool = population_risk(j, fit_histogram(pts, s, k, Mode::kPool));
      row.r_dg = population_risk(j, fit_histogram(pts, s, k, Mode::kDg));
    } else {
      row.r_pool = population_risk(j, fit_binned_threshold(pts, s, k, Mode::kPool));
      row.r_dg = population_risk(j, fit_binned_threshold(pts, s, k, Mode::kDg));
    }
    if (!train && !row.hierarchy_holds())
      throw ConsistencyError("capacity_sweep: R_pool < R_dg at k = " + std::to_string(k));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace dg_risklab
