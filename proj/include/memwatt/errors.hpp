// Error types shared across the library. Everything user-facing derives
// from memwatt::error so callers can catch one type at the CLI boundary.
#pragma once

#include <stdexcept>
#include <string>

namespace memwatt {

class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input document: missing/unknown field, wrong type, bad label.
class schema_error : public error {
 public:
  using error::error;
};

// Structurally well-formed input that violates a domain invariant.
class invariant_error : public error {
 public:
  using error::error;
};

// Bad argument to an operation (empty input, out-of-range value, ...).
class argument_error : public error {
 public:
  using error::error;
};

// Line-oriented text that failed to parse; carries the 1-based line number.
class parse_error : public error {
 public:
  parse_error(std::size_t line, const std::string& what)
      : error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Workload launch or adapter failure.
class exec_error : public error {
 public:
  using error::error;
};

}  // namespace memwatt
