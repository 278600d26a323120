#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace labelnoise {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise malformed numeric input.
class InvalidInputError : public Error {
public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
public:
  EmptyDatasetError() : Error("dataset has no samples") {}
  using Error::Error;
};

/// Inconsistent or out-of-range configuration values.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Cholesky breakdown (after jitter escalation) or a non-finite iterate.
class NumericalError : public Error {
public:
  NumericalError(const std::string& what, double smallest_pivot)
      : Error(what), smallest_pivot_(smallest_pivot) {}

  double smallest_pivot() const noexcept { return smallest_pivot_; }

private:
  double smallest_pivot_;
};

/// A metric that is undefined for the given input, e.g. AUC without negatives.
class UndefinedMetricError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Malformed dataset file; `line()` is 1-based and counts the header.
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

} // namespace labelnoise
