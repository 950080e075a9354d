#pragma once

#include <stdexcept>
#include <string>

namespace lexpand {

enum class ErrorKind {
  invalid_input,
  parse,
  not_locally_expanding,
  cover_gap,
  not_admissible,
  accessibility,
  constructive_failure,
  boundary_point,
  invalid_word,
  no_cycle,
  convergence_failure,
  non_invariant,
  reducible,
  dependency,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::parse: return "parse";
    case ErrorKind::not_locally_expanding: return "not-locally-expanding";
    case ErrorKind::cover_gap: return "cover-gap";
    case ErrorKind::not_admissible: return "not-admissible";
    case ErrorKind::accessibility: return "accessibility";
    case ErrorKind::constructive_failure: return "constructive-failure";
    case ErrorKind::boundary_point: return "boundary-point";
    case ErrorKind::invalid_word: return "invalid-word";
    case ErrorKind::no_cycle: return "no-cycle";
    case ErrorKind::convergence_failure: return "convergence-failure";
    case ErrorKind::non_invariant: return "non-invariant";
    case ErrorKind::reducible: return "reducible";
    case ErrorKind::dependency: return "dependency";
  }
  return "unknown";
}

/// Single exception type for the library; `kind()` distinguishes the
/// failure classes callers branch on (the CLI maps them to exit codes).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failure with a 1-based source position.
class ParseError : public Error {
 public:
  ParseError(int line, int column, const std::string& what)
      : Error(ErrorKind::parse,
              "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace lexpand
