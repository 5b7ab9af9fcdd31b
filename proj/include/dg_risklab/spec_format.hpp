#pragma once

// Text format shared by distribution specs and experiment configs.
//
//   # comment (anywhere after '#')
//   [section]              or  [section argument]
//   key = value            key/value entry
//   label: v1, v2, ...     labelled row
//   v1, v2, ...            bare row
//
// Distribution spec sections:
//
//   [support]
//   x_values = 0, 0.5, 1          decimals, strictly no duplicates
//   y_count = 2                   labels are 1..y_count
//   m_values = a, b               symbols: no whitespace, ',', ':', '#', '[', ']', '='
//   d_values = d1, d2
//
//   [p_d]
//   0.5, 0.5                      one bare row, |D| entries
//
//   [p_m_given_d]
//   d1: 1, 0                      one row per domain symbol, |M| entries each
//   d2: 0, 1
//
//   [p_xy_given_d d1]             one block per domain symbol
//   0: 0.45, 0.05                 one row per x value, K entries; block sums to 1
//   ...
//
// Decimals are written in shortest round-trip form (at most 17 significant digits), so
// parse(emit(f)) == f bit for bit.

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dg_risklab/distribution.hpp"
#include "dg_risklab/error.hpp"
#include "dg_risklab/format.hpp"

namespace dg_risklab {

namespace text {

enum class EntryKind { kKeyValue, kRow, kBare };

struct Entry {
  EntryKind kind;
  std::string key;  // key or row label; empty for bare rows
  std::string value;
  std::size_t line;
};

struct Section {
  std::string name;
  std::string arg;
  std::size_t line;
  std::vector<Entry> entries;

  std::string title() const { return arg.empty() ? name : name + " " + arg; }
};

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.emplace_back(trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::vector<Section> parse_document(std::string_view text) {
  std::vector<Section> sections;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const auto line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError(sections.empty() ? "" : sections.back().title(), "", line_no,
                         "unterminated section header");
      const auto inner = trim(line.substr(1, line.size() - 2));
      const auto sp = inner.find_first_of(" \t");
      Section sec;
      sec.name = std::string(inner.substr(0, sp));
      sec.arg = sp == std::string_view::npos ? "" : std::string(trim(inner.substr(sp)));
      sec.line = line_no;
      if (sec.name.empty()) throw ParseError("", "", line_no, "empty section name");
      sections.push_back(std::move(sec));
      continue;
    }
    if (sections.empty()) throw ParseError("", "", line_no, "content before the first section");

    Entry e;
    e.line = line_no;
    if (const auto eq = line.find('='); eq != std::string_view::npos) {
      e.kind = EntryKind::kKeyValue;
      e.key = std::string(trim(line.substr(0, eq)));
      e.value = std::string(trim(line.substr(eq + 1)));
      if (e.key.empty()) throw ParseError(sections.back().title(), "", line_no, "missing key before '='");
    } else if (const auto colon = line.find(':'); colon != std::string_view::npos) {
      e.kind = EntryKind::kRow;
      e.key = std::string(trim(line.substr(0, colon)));
      e.value = std::string(trim(line.substr(colon + 1)));
    } else {
      e.kind = EntryKind::kBare;
      e.value = std::string(line);
    }
    sections.back().entries.push_back(std::move(e));
  }
  return sections;
}

inline std::vector<double> parse_decimals(const Section& sec, const Entry& e, std::string_view row) {
  std::vector<double> out;
  for (const auto& tok : split_list(e.value)) {
    double v;
    if (!parse_double(tok, v))
      throw ParseError(sec.title(), std::string(row), e.line, "'" + tok + "' is not a decimal number");
    out.push_back(v);
  }
  return out;
}

inline bool is_symbol(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c == ',' || c == ':' || c == '#' || c == '[' || c == ']' || c == '=' || c == ' ' ||
        c == '\t' || c == '\n' || c == '\r')
      return false;
  return true;
}

/// Key/value view of a section with "unknown key" and "missing key" diagnostics.
class KeyValues {
 public:
  explicit KeyValues(const Section& sec) : sec_(sec) {
    for (const auto& e : sec.entries) {
      if (e.kind != EntryKind::kKeyValue)
        throw ParseError(sec.title(), e.key, e.line, "expected 'key = value'");
      if (!map_.emplace(e.key, &e).second)
        throw ParseError(sec.title(), e.key, e.line, "duplicate key");
    }
  }

  bool has(const std::string& key) const { return map_.count(key) != 0; }

  const Entry& entry(const std::string& key) const {
    auto it = map_.find(key);
    if (it == map_.end()) throw ParseError(sec_.title(), key, sec_.line, "missing key");
    return *it->second;
  }

  std::string str(const std::string& key) const { return entry(key).value; }
  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
  }

  double real(const std::string& key) const {
    const auto& e = entry(key);
    double v;
    if (!parse_double(e.value, v)) fail(key, "'" + e.value + "' is not a decimal number");
    return v;
  }
  double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

  std::size_t count(const std::string& key) const {
    const auto& e = entry(key);
    std::size_t v;
    if (!parse_size(e.value, v)) fail(key, "'" + e.value + "' is not a non-negative integer");
    return v;
  }
  std::size_t count(const std::string& key, std::size_t fallback) const {
    return has(key) ? count(key) : fallback;
  }

  std::uint64_t u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& e = entry(key);
    unsigned long long v;
    if (!parse_u64(e.value, v)) fail(key, "'" + e.value + "' is not an unsigned integer");
    return v;
  }

  std::vector<double> reals(const std::string& key) const {
    return parse_decimals(sec_, entry(key), key);
  }

  std::vector<std::size_t> counts(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& tok : split_list(entry(key).value)) {
      std::size_t v;
      if (!parse_size(tok, v)) fail(key, "'" + tok + "' is not a non-negative integer");
      out.push_back(v);
    }
    return out;
  }

  void require_known(std::initializer_list<std::string_view> known) const {
    for (const auto& [k, e] : map_) {
      bool ok = false;
      for (auto name : known) ok = ok || k == name;
      if (!ok) throw ParseError(sec_.title(), k, e->line, "unknown key");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ParseError(sec_.title(), key, has(key) ? entry(key).line : sec_.line, what);
  }

 private:
  const Section& sec_;
  std::map<std::string, const Entry*> map_;
};

}  // namespace text

namespace detail {

inline void check_row_stochastic(const text::Section& sec, const std::string& row, std::size_t line,
                                 const std::vector<double>& v, std::size_t expected) {
  if (v.size() != expected)
    throw ParseError(sec.title(), row, line,
                     "expected " + std::to_string(expected) + " entries, got " + std::to_string(v.size()));
  double total = 0.0;
  for (double p : v) {
    if (!(p >= 0.0)) throw ParseError(sec.title(), row, line, "negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > kStructuralTol)
    throw ParseError(sec.title(), row, line, "row sums to " + format_sig(total) + ", expected 1");
}

}  // namespace detail

inline FactoredDistribution parse_spec(std::string_view text_in) {
  using namespace text;
  const auto sections = parse_document(text_in);
  auto find = [&](std::string_view name) -> const Section* {
    const Section* hit = nullptr;
    for (const auto& s : sections)
      if (s.name == name && s.arg.empty()) {
        if (hit) throw ParseError(s.title(), "", s.line, "duplicate section");
        hit = &s;
      }
    return hit;
  };
  for (const auto& s : sections) {
    if (s.name != "support" && s.name != "p_d" && s.name != "p_m_given_d" && s.name != "p_xy_given_d")
      throw ParseError(s.title(), "", s.line, "unknown section");
    if (s.name == "p_xy_given_d" && s.arg.empty())
      throw ParseError(s.title(), "", s.line, "block header must name a domain symbol");
    if (s.name != "p_xy_given_d" && !s.arg.empty())
      throw ParseError(s.title(), "", s.line, "unexpected section argument");
  }

  const Section* sup = find("support");
  if (!sup) throw ParseError("support", "", 0, "missing section");
  KeyValues kv(*sup);
  kv.require_known({"x_values", "y_count", "m_values", "d_values"});
  Support support;
  support.x_values = kv.reals("x_values");
  support.y_count = kv.count("y_count");
  auto symbols = [&](const std::string& key) {
    auto list = split_list(kv.str(key));
    for (const auto& s : list)
      if (!is_symbol(s)) kv.fail(key, "'" + s + "' is not a valid symbol");
    return list;
  };
  support.m_values = symbols("m_values");
  support.d_values = symbols("d_values");
  try {
    support.validate();
  } catch (const ValidationError& e) {
    throw ParseError("support", "", sup->line, e.what());
  }
  const std::size_t nx = support.nx(), ny = support.ny(), nm = support.nm(), nd = support.nd();

  auto d_index = [&](const Section& sec, const std::string& sym, std::size_t line) {
    for (std::size_t d = 0; d < nd; ++d)
      if (support.d_values[d] == sym) return d;
    throw ParseError(sec.title(), sym, line, "unknown domain symbol '" + sym + "'");
  };

  const Section* pd_sec = find("p_d");
  if (!pd_sec) throw ParseError("p_d", "", 0, "missing section");
  if (pd_sec->entries.size() != 1 || pd_sec->entries[0].kind != EntryKind::kBare)
    throw ParseError("p_d", "", pd_sec->line, "expected exactly one bare row");
  auto p_d = parse_decimals(*pd_sec, pd_sec->entries[0], "1");
  detail::check_row_stochastic(*pd_sec, "1", pd_sec->entries[0].line, p_d, nd);

  const Section* pm_sec = find("p_m_given_d");
  if (!pm_sec) throw ParseError("p_m_given_d", "", 0, "missing section");
  std::vector<std::vector<double>> p_m(nd);
  std::vector<bool> seen(nd, false);
  for (const auto& e : pm_sec->entries) {
    if (e.kind != EntryKind::kRow) throw ParseError(pm_sec->title(), "", e.line, "expected 'domain: values'");
    const auto d = d_index(*pm_sec, e.key, e.line);
    if (seen[d]) throw ParseError(pm_sec->title(), e.key, e.line, "duplicate row");
    seen[d] = true;
    p_m[d] = parse_decimals(*pm_sec, e, e.key);
    detail::check_row_stochastic(*pm_sec, e.key, e.line, p_m[d], nm);
  }
  for (std::size_t d = 0; d < nd; ++d)
    if (!seen[d]) throw ParseError(pm_sec->title(), support.d_values[d], pm_sec->line, "missing row");

  std::vector<std::vector<double>> p_xy(nd);
  std::vector<bool> have_block(nd, false);
  for (const auto& sec : sections) {
    if (sec.name != "p_xy_given_d") continue;
    const auto d = d_index(sec, sec.arg, sec.line);
    if (have_block[d]) throw ParseError(sec.title(), "", sec.line, "duplicate block");
    have_block[d] = true;
    std::vector<double> block(nx * ny, 0.0);
    std::vector<bool> have_row(nx, false);
    double total = 0.0;
    for (const auto& e : sec.entries) {
      if (e.kind != EntryKind::kRow) throw ParseError(sec.title(), "", e.line, "expected 'x: values'");
      double xv;
      if (!parse_double(e.key, xv)) throw ParseError(sec.title(), e.key, e.line, "row label is not a decimal");
      std::size_t x = nx;
      for (std::size_t i = 0; i < nx; ++i)
        if (support.x_values[i] == xv) x = i;
      if (x == nx) throw ParseError(sec.title(), e.key, e.line, "x value not in support");
      if (have_row[x]) throw ParseError(sec.title(), e.key, e.line, "duplicate row");
      have_row[x] = true;
      const auto vals = parse_decimals(sec, e, e.key);
      if (vals.size() != ny)
        throw ParseError(sec.title(), e.key, e.line,
                         "expected " + std::to_string(ny) + " entries, got " + std::to_string(vals.size()));
      for (std::size_t y = 0; y < ny; ++y) {
        if (!(vals[y] >= 0.0)) throw ParseError(sec.title(), e.key, e.line, "negative probability");
        block[x * ny + y] = vals[y];
        total += vals[y];
      }
    }
    for (std::size_t x = 0; x < nx; ++x)
      if (!have_row[x])
        throw ParseError(sec.title(), format_exact(support.x_values[x]), sec.line, "missing row");
    if (std::abs(total - 1.0) > kStructuralTol)
      throw ParseError(sec.title(), "block", sec.line, "block sums to " + format_sig(total) + ", expected 1");
    p_xy[d] = std::move(block);
  }
  for (std::size_t d = 0; d < nd; ++d)
    if (!have_block[d]) throw ParseError("p_xy_given_d " + support.d_values[d], "", 0, "missing block");

  return FactoredDistribution(std::move(support), std::move(p_d), std::move(p_m), std::move(p_xy));
}

namespace detail {

inline std::string join_exact(const std::vector<double>& v, std::size_t from = 0, std::size_t n = SIZE_MAX) {
  std::string out;
  const std::size_t end = std::min(v.size(), n == SIZE_MAX ? v.size() : from + n);
  for (std::size_t i = from; i < end; ++i) {
    if (i > from) out += ", ";
    out += format_exact(v[i]);
  }
  return out;
}

inline std::string join_symbols(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!text::is_symbol(v[i])) throw UsageError("emit_spec: '" + v[i] + "' cannot be written as a symbol");
    if (i) out += ", ";
    out += v[i];
  }
  return out;
}

}  // namespace detail

inline std::string emit_spec(const FactoredDistribution& f) {
  const Support& s = f.support();
  std::ostringstream os;
  os << "# dg-risklab distribution spec\n";
  os << "[support]\n";
  os << "x_values = " << detail::join_exact(s.x_values) << "\n";
  os << "y_count = " << s.y_count << "\n";
  os << "m_values = " << detail::join_symbols(s.m_values) << "\n";
  os << "d_values = " << detail::join_symbols(s.d_values) << "\n\n";
  os << "[p_d]\n" << detail::join_exact(f.p_d()) << "\n\n";
  os << "[p_m_given_d]\n";
  for (std::size_t d = 0; d < s.nd(); ++d)
    os << s.d_values[d] << ": " << detail::join_exact(f.p_m_given_d()[d]) << "\n";
  for (std::size_t d = 0; d < s.nd(); ++d) {
    os << "\n[p_xy_given_d " << s.d_values[d] << "]\n";
    for (std::size_t x = 0; x < s.nx(); ++x)
      os << format_exact(s.x_values[x]) << ": "
         << detail::join_exact(f.p_xy_given_d()[d], x * s.ny(), s.ny()) << "\n";
  }
  return os.str();
}

/// FNV-1a hash of the emitted spec, as 16 hex digits. Identifies a distribution in outputs.
inline std::string fingerprint(const FactoredDistribution& f) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : emit_spec(f)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
  return out;
}

}  // namespace dg_risklab
