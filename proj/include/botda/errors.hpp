#pragma once

#include <stdexcept>
#include <string>

namespace botda {

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inconsistent or impossible configuration (grid too short, bad sweep, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's contract (mismatched grids, un-normalized input, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A configured value violates a physical validity rule (e.g. the minimum DPP width).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Persisted data is truncated or its header disagrees with the payload.
class CorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text could not be parsed; carries the 1-based line and column.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column)
      : std::runtime_error(what + " (line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ")"),
        line_(line),
        column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

/// External trace file rejected; row is the first offending data row (1-based).
class IngestError : public std::runtime_error {
 public:
  IngestError(const std::string& what, long row)
      : std::runtime_error(what + " (row " + std::to_string(row) + ")"), row_(row) {}
  long row() const noexcept { return row_; }

 private:
  long row_;
};

}  // namespace botda
