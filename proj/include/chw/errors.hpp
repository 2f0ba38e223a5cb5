#pragma once

#include <stdexcept>
#include <string>

namespace chw {

// Base of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed input: non-stochastic rows, inadmissible words, bad configs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Iterative method failed or the chain lacks the structure it needs.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Malformed or incomplete configuration; the CLI maps it to exit code 2.
class UsageError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Fiber map violates the class of admissible skew products (monotonicity, endpoints).
class ClassViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace chw
