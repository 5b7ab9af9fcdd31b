#pragma once

// Brute-force reference computations for tests. Deliberately shares no code path with the
// library beyond reading FactoredDistribution factors.

#include <cmath>
#include <functional>
#include <map>
#include <tuple>
#include <vector>

#include "dg_risklab/distribution.hpp"

namespace oracle {

using dg_risklab::FactoredDistribution;

using Cell = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>;  // x, y, m, d

inline std::map<Cell, double> joint(const FactoredDistribution& f) {
  const auto& s = f.support();
  std::map<Cell, double> out;
  for (std::size_t d = 0; d < s.nd(); ++d)
    for (std::size_t m = 0; m < s.nm(); ++m)
      for (std::size_t x = 0; x < s.nx(); ++x)
        for (std::size_t y = 0; y < s.ny(); ++y)
          out[{x, y, m, d}] = f.p_d()[d] * f.p_m_given_d()[d][m] * f.p_xy_given_d()[d][x * s.ny() + y];
  return out;
}

/// Calls visit(assignment) for every map from `cells` inputs to K labels.
inline void for_each_function(std::size_t cells, std::size_t K,
                              const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> a(cells, 0);
  while (true) {
    visit(a);
    std::size_t i = 0;
    while (i < cells && ++a[i] == K) a[i++] = 0;
    if (i == cells) return;
  }
}

/// Minimum 0-1 risk over every classifier of the given input, by exhaustive enumeration.
/// `key(x, m, d)` maps a joint cell to a classifier input index in [0, cells).
inline double min_risk(const FactoredDistribution& f, std::size_t cells,
                       const std::function<std::size_t(std::size_t, std::size_t, std::size_t)>& key) {
  const auto p = joint(f);
  double best = 2.0;
  for_each_function(cells, f.support().ny(), [&](const std::vector<std::size_t>& g) {
    double err = 0.0;
    for (const auto& [c, v] : p) {
      const auto [x, y, m, d] = c;
      if (g[key(x, m, d)] != y) err += v;
    }
    best = std::min(best, err);
  });
  return best;
}

inline double r_pool(const FactoredDistribution& f) {
  return min_risk(f, f.support().nx(), [](auto x, auto, auto) { return x; });
}
inline double r_dg(const FactoredDistribution& f) {
  const auto nm = f.support().nm();
  return min_risk(f, f.support().nx() * nm, [nm](auto x, auto m, auto) { return x * nm + m; });
}
inline double r_full(const FactoredDistribution& f) {
  const auto nd = f.support().nd();
  return min_risk(f, f.support().nx() * nd, [nd](auto x, auto, auto d) { return x * nd + d; });
}

/// P(Y | X = x, M = m) by direct ratio of summed cells.
inline std::vector<double> posterior_xm(const FactoredDistribution& f, std::size_t x, std::size_t m) {
  const auto p = joint(f);
  std::vector<double> num(f.support().ny(), 0.0);
  double den = 0.0;
  for (const auto& [c, v] : p) {
    const auto [cx, cy, cm, cd] = c;
    if (cx == x && cm == m) {
      num[cy] += v;
      den += v;
    }
  }
  for (auto& v : num) v /= den;
  return num;
}

/// Sum over d of p_d(d) * p_xy_given_d(x, y | d), by nested loops.
inline std::vector<double> pooled_xy(const FactoredDistribution& f) {
  const auto& s = f.support();
  std::vector<double> out(s.nx() * s.ny(), 0.0);
  for (std::size_t x = 0; x < s.nx(); ++x)
    for (std::size_t y = 0; y < s.ny(); ++y)
      for (std::size_t d = 0; d < s.nd(); ++d) out[x * s.ny() + y] += f.p_d()[d] * f.p_xy_given_d()[d][x * s.ny() + y];
  return out;
}

/// 3-sigma binomial acceptance for an observed frequency.
inline bool within_binomial(double observed, double p, std::size_t n, double sigmas = 3.0) {
  const double sd = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  return std::abs(observed - p) <= sigmas * sd + 1e-15;
}

}  // namespace oracle
