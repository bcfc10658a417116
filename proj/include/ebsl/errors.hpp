#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace ebsl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed (non-finite intermediate, failed factorization).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The state collapsed to a degenerate configuration (e.g. every coordinate pruned).
class DegenerateError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A bracketed root search found no sign change.
class RootNotFound : public NumericError {
 public:
  using NumericError::NumericError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Numeric failure inside an iterative solver, tagged with where it happened.
class SolverError : public NumericError {
 public:
  SolverError(long column, int iteration, std::string op, const std::string& what)
      : NumericError(format(column, iteration, op, what)),
        column_(column),
        iteration_(iteration),
        op_(std::move(op)) {}

  long column() const noexcept { return column_; }
  int iteration() const noexcept { return iteration_; }
  const std::string& op() const noexcept { return op_; }

 private:
  static std::string format(long column, int iteration, const std::string& op,
                            const std::string& what) {
    std::ostringstream os;
    os << "column " << column << ", iteration " << iteration << ", " << op << ": " << what;
    return os.str();
  }

  long column_;
  int iteration_;
  std::string op_;
};

}  // namespace ebsl
