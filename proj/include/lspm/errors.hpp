#pragma once

#include <stdexcept>
#include <string>

namespace lspm {

// Invalid input: bad hyperparameters, malformed networks, out-of-range indices.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed text input, with the 1-based line number that triggered it.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A numerical routine failed to reach its tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Root bracketing failed; carries the last bracket tried.
class BracketError : public NumericalError {
 public:
  BracketError(const std::string& what, double lo, double hi)
      : NumericalError(what + " (last bracket [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "])"),
        lo_(lo),
        hi_(hi) {}
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

// A metric is not defined for the given input (single-class labels, zero variance).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lspm
