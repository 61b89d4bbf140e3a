#ifndef STARSEL_ERROR_HPP
#define STARSEL_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace starsel {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument to a numerical routine (bad order, wrong dimension, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A basis cannot be built from the supplied covariate values.
class DegenerateBasis : public Error {
 public:
  using Error::Error;
};

/// Problems with input data (CSV parsing, response type checks, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Model configuration text that cannot be parsed. Carries a 1-based position.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& msg, std::size_t line, std::size_t column)
      : Error("line " + std::to_string(line) + ", column " +
              std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Unrecoverable numerical failure inside the MCMC sampler.
class SamplerError : public Error {
 public:
  using Error::Error;
};

/// Numerical integration did not reach the requested tolerance.
class QuadratureError : public Error {
 public:
  using Error::Error;
};

}  // namespace starsel

#endif  // STARSEL_ERROR_HPP
