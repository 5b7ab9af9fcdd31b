#pragma once

#include <stdexcept>
#include <string>

namespace dg_risklab {

/// A factor or table violates its probabilistic invariants.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed spec or config text. Carries the section and row where parsing stopped.
class ParseError : public std::invalid_argument {
 public:
  ParseError(std::string section, std::string row, std::size_t line, const std::string& what)
      : std::invalid_argument("section [" + section + "]" + (row.empty() ? "" : ", row " + row) +
                              " (line " + std::to_string(line) + "): " + what),
        section_(std::move(section)),
        row_(std::move(row)),
        line_(line) {}

  const std::string& section() const noexcept { return section_; }
  const std::string& row() const noexcept { return row_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string section_;
  std::string row_;
  std::size_t line_;
};

/// Conditioning on an event of zero probability.
class UnsupportedEvent : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller asked for something the operation does not support (empty axis set, non-binary
/// threshold fit, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two independent computations of the same quantity disagree. Always a bug.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A generator could not produce an instance satisfying its contract.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dg_risklab
