#pragma once

// Finite joint laws over (X, Y, M, D) in the factored form
//   P(x, y, m, d) = P_D(d) * P_{M|D}(m | d) * P_{XY|D}(x, y | d),
// which makes (X, Y) conditionally independent of M given D by construction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dg_risklab/error.hpp"

namespace dg_risklab {

/// Tolerance for structural identities (normalization, exact factorization).
inline constexpr double kStructuralTol = 1e-12;
/// Tolerance for derived quantities (independence checks on expanded joints).
inline constexpr double kDerivedTol = 1e-10;

/// Class labels are 1..K in files and reports; 0..K-1 internally.
using ClassIndex = std::size_t;

struct Support {
  std::vector<double> x_values;
  std::size_t y_count = 2;
  std::vector<std::string> m_values;
  std::vector<std::string> d_values;

  std::size_t nx() const noexcept { return x_values.size(); }
  std::size_t ny() const noexcept { return y_count; }
  std::size_t nm() const noexcept { return m_values.size(); }
  std::size_t nd() const noexcept { return d_values.size(); }
  std::size_t cells() const noexcept { return nx() * ny() * nm() * nd(); }

  void validate() const {
    if (x_values.empty()) throw ValidationError("support: x_values is empty");
    if (m_values.empty()) throw ValidationError("support: m_values is empty");
    if (d_values.empty()) throw ValidationError("support: d_values is empty");
    if (y_count < 2) throw ValidationError("support: y_count must be >= 2");
    for (std::size_t i = 0; i < x_values.size(); ++i) {
      if (!std::isfinite(x_values[i]))
        throw ValidationError("support: x_values[" + std::to_string(i) + "] is not finite");
    }
    check_unique(x_values, "x_values");
    check_unique(m_values, "m_values");
    check_unique(d_values, "d_values");
  }

  bool operator==(const Support&) const = default;

 private:
  template <typename T>
  static void check_unique(const std::vector<T>& v, const char* name) {
    std::set<T> seen;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!seen.insert(v[i]).second)
        throw ValidationError(std::string("support: duplicate entry in ") + name + " at index " +
                              std::to_string(i));
    }
  }
};

/// The generative model (P_D, P_{M|D}, P_{XY|D}). Validated on construction, immutable after.
class FactoredDistribution {
 public:
  /// `p_xy_given_d[d]` is laid out row-major as [x][y] (|X| rows of K entries).
  FactoredDistribution(Support support, std::vector<double> p_d,
                       std::vector<std::vector<double>> p_m_given_d,
                       std::vector<std::vector<double>> p_xy_given_d)
      : support_(std::move(support)),
        p_d_(std::move(p_d)),
        p_m_given_d_(std::move(p_m_given_d)),
        p_xy_given_d_(std::move(p_xy_given_d)) {
    validate();
  }

  const Support& support() const noexcept { return support_; }
  const std::vector<double>& p_d() const noexcept { return p_d_; }
  const std::vector<std::vector<double>>& p_m_given_d() const noexcept { return p_m_given_d_; }
  const std::vector<std::vector<double>>& p_xy_given_d() const noexcept { return p_xy_given_d_; }

  double p_xy(std::size_t d, std::size_t x, ClassIndex y) const {
    return p_xy_given_d_[d][x * support_.ny() + y];
  }

  bool operator==(const FactoredDistribution&) const = default;

 private:
  void validate() const {
    support_.validate();
    const auto& s = support_;
    check_stochastic(p_d_, s.nd(), "p_d", "");
    if (p_m_given_d_.size() != s.nd())
      throw ValidationError("p_m_given_d: expected " + std::to_string(s.nd()) + " rows, got " +
                            std::to_string(p_m_given_d_.size()));
    if (p_xy_given_d_.size() != s.nd())
      throw ValidationError("p_xy_given_d: expected " + std::to_string(s.nd()) + " blocks, got " +
                            std::to_string(p_xy_given_d_.size()));
    for (std::size_t d = 0; d < s.nd(); ++d) {
      const std::string where = " (d=" + s.d_values[d] + ", index " + std::to_string(d) + ")";
      check_stochastic(p_m_given_d_[d], s.nm(), "p_m_given_d row", where);
      check_stochastic(p_xy_given_d_[d], s.nx() * s.ny(), "p_xy_given_d block", where);
    }
  }

  static void check_stochastic(const std::vector<double>& row, std::size_t expected,
                               const std::string& name, const std::string& where) {
    if (row.size() != expected)
      throw ValidationError(name + where + ": expected " + std::to_string(expected) +
                            " entries, got " + std::to_string(row.size()));
    double total = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!(row[i] >= 0.0) || !std::isfinite(row[i]))
        throw ValidationError(name + where + ": entry " + std::to_string(i) +
                              " is negative or not finite");
      total += row[i];
    }
    if (std::abs(total - 1.0) > kStructuralTol)
      throw ValidationError(name + where + ": sums to " + std::to_string(total) +
                            ", expected 1");
  }

  Support support_;
  std::vector<double> p_d_;
  std::vector<std::vector<double>> p_m_given_d_;
  std::vector<std::vector<double>> p_xy_given_d_;
};

/// Axis bitmask over (X, Y, M, D).
enum Axis : unsigned { kX = 1u, kY = 2u, kM = 4u, kD = 8u };
using AxisSet = unsigned;
inline constexpr AxisSet kAllAxes = kX | kY | kM | kD;

/// Dense joint P(x, y, m, d). Tables produced by build_joint are `verified`; tables loaded
/// from raw values are not, and only the independence checker should trust them.
class JointTable {
 public:
  static JointTable from_raw(Support support, std::vector<double> p) {
    support.validate();
    if (p.size() != support.cells())
      throw ValidationError("joint: expected " + std::to_string(support.cells()) +
                            " cells, got " + std::to_string(p.size()));
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!(p[i] >= 0.0) || !std::isfinite(p[i]))
        throw ValidationError("joint: cell " + std::to_string(i) + " is negative or not finite");
      total += p[i];
    }
    if (std::abs(total - 1.0) > kStructuralTol)
      throw ValidationError("joint: total mass " + std::to_string(total) + ", expected 1");
    return JointTable(std::move(support), std::move(p), false);
  }

  const Support& support() const noexcept { return support_; }
  const std::vector<double>& values() const noexcept { return p_; }
  bool verified() const noexcept { return verified_; }

  std::size_t index(std::size_t x, ClassIndex y, std::size_t m, std::size_t d) const noexcept {
    return ((x * support_.ny() + y) * support_.nm() + m) * support_.nd() + d;
  }
  double operator()(std::size_t x, ClassIndex y, std::size_t m, std::size_t d) const noexcept {
    return p_[index(x, y, m, d)];
  }

 private:
  friend JointTable build_joint(const FactoredDistribution& f);

  JointTable(Support support, std::vector<double> p, bool verified)
      : support_(std::move(support)), p_(std::move(p)), verified_(verified) {}

  Support support_;
  std::vector<double> p_;
  bool verified_;
};

inline JointTable build_joint(const FactoredDistribution& f) {
  const Support& s = f.support();
  JointTable j(s, std::vector<double>(s.cells(), 0.0), true);
  for (std::size_t x = 0; x < s.nx(); ++x)
    for (ClassIndex y = 0; y < s.ny(); ++y)
      for (std::size_t m = 0; m < s.nm(); ++m)
        for (std::size_t d = 0; d < s.nd(); ++d)
          j.p_[j.index(x, y, m, d)] = f.p_d()[d] * f.p_m_given_d()[d][m] * f.p_xy(d, x, y);
  return j;
}

struct IndependenceCheck {
  bool holds = true;
  double max_violation = 0.0;
};

/// Confirms P(x, y | m, d) = P(x, y | d) on every (m, d) with positive mass.
inline IndependenceCheck check_conditional_independence(const JointTable& j, double tol) {
  const Support& s = j.support();
  IndependenceCheck out;
  std::vector<double> p_md(s.nm() * s.nd(), 0.0);
  std::vector<double> p_d(s.nd(), 0.0);
  std::vector<double> p_xyd(s.nx() * s.ny() * s.nd(), 0.0);
  for (std::size_t x = 0; x < s.nx(); ++x)
    for (ClassIndex y = 0; y < s.ny(); ++y)
      for (std::size_t m = 0; m < s.nm(); ++m)
        for (std::size_t d = 0; d < s.nd(); ++d) {
          const double v = j(x, y, m, d);
          p_md[m * s.nd() + d] += v;
          p_d[d] += v;
          p_xyd[(x * s.ny() + y) * s.nd() + d] += v;
        }
  for (std::size_t m = 0; m < s.nm(); ++m)
    for (std::size_t d = 0; d < s.nd(); ++d) {
      const double pmd = p_md[m * s.nd() + d];
      if (pmd <= 0.0) continue;
      for (std::size_t x = 0; x < s.nx(); ++x)
        for (ClassIndex y = 0; y < s.ny(); ++y) {
          const double cond_md = j(x, y, m, d) / pmd;
          const double cond_d = p_xyd[(x * s.ny() + y) * s.nd() + d] / p_d[d];
          out.max_violation = std::max(out.max_violation, std::abs(cond_md - cond_d));
        }
    }
  out.holds = out.max_violation <= tol;
  return out;
}

/// Probability table over a subset of axes, kept in X, Y, M, D order.
class MarginalTable {
 public:
  MarginalTable(AxisSet axes, std::vector<std::size_t> dims)
      : axes_(axes), dims_(std::move(dims)) {
    std::size_t n = 1;
    for (auto k : dims_) n *= k;
    p_.assign(n, 0.0);
  }

  AxisSet axes() const noexcept { return axes_; }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  const std::vector<double>& values() const noexcept { return p_; }

  /// Indices for the kept axes only, in X, Y, M, D order.
  double at(std::initializer_list<std::size_t> idx) const { return p_[flat(idx)]; }

  std::size_t flat(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != dims_.size()) throw UsageError("marginal: wrong number of indices");
    std::size_t k = 0, i = 0;
    for (auto v : idx) {
      if (v >= dims_[i]) throw UsageError("marginal: index out of range");
      k = k * dims_[i++] + v;
    }
    return k;
  }

  double& cell(std::size_t flat_index) { return p_[flat_index]; }

 private:
  AxisSet axes_;
  std::vector<std::size_t> dims_;
  std::vector<double> p_;
};

inline MarginalTable marginal(const JointTable& j, AxisSet keep) {
  keep &= kAllAxes;
  if (keep == 0) throw UsageError("marginal: keep set is empty");
  const Support& s = j.support();
  const std::size_t full[4] = {s.nx(), s.ny(), s.nm(), s.nd()};
  std::vector<std::size_t> dims;
  for (int a = 0; a < 4; ++a)
    if (keep & (1u << a)) dims.push_back(full[a]);
  MarginalTable out(keep, dims);
  for (std::size_t x = 0; x < s.nx(); ++x)
    for (ClassIndex y = 0; y < s.ny(); ++y)
      for (std::size_t m = 0; m < s.nm(); ++m)
        for (std::size_t d = 0; d < s.nd(); ++d) {
          const std::size_t idx[4] = {x, y, m, d};
          std::size_t k = 0;
          for (int a = 0; a < 4; ++a)
            if (keep & (1u << a)) k = k * full[a] + idx[a];
          out.cell(k) += j(x, y, m, d);
        }
  return out;
}

/// Conditioning event over any of X, M, D (indices into the support lists).
struct Event {
  std::optional<std::size_t> x = std::nullopt;
  std::optional<std::size_t> m = std::nullopt;
  std::optional<std::size_t> d = std::nullopt;
};

/// P(Y = k | event) for k = 0..K-1. Throws UnsupportedEvent if the event has zero mass.
inline std::vector<double> posterior(const JointTable& j, const Event& e) {
  const Support& s = j.support();
  if ((e.x && *e.x >= s.nx()) || (e.m && *e.m >= s.nm()) || (e.d && *e.d >= s.nd()))
    throw UsageError("posterior: event index out of range");
  std::vector<double> mass(s.ny(), 0.0);
  for (std::size_t x = 0; x < s.nx(); ++x) {
    if (e.x && *e.x != x) continue;
    for (ClassIndex y = 0; y < s.ny(); ++y)
      for (std::size_t m = 0; m < s.nm(); ++m) {
        if (e.m && *e.m != m) continue;
        for (std::size_t d = 0; d < s.nd(); ++d) {
          if (e.d && *e.d != d) continue;
          mass[y] += j(x, y, m, d);
        }
      }
  }
  double total = 0.0;
  for (double v : mass) total += v;
  if (!(total > 0.0)) throw UnsupportedEvent("posterior: conditioning event has zero probability");
  for (double& v : mass) v /= total;
  return mass;
}

}  // namespace dg_risklab
