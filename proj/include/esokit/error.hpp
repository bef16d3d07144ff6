#pragma once

#include <stdexcept>
#include <string>

namespace esokit {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input (bad spec field, out-of-range index, ...).
class ValidationError : public Error {
 public:
  ValidationError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Text input that failed to parse; carries a 1-based line (and column when known).
class ParseError : public Error {
 public:
  ParseError(const std::string& source, int line, int column, const std::string& what)
      : Error(source + ":" + std::to_string(line) +
              (column > 0 ? ":" + std::to_string(column) : std::string()) + ": " + what),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// Requested computation does not fit the configured capacity (enumeration cap, dense cap).
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Method/formula not defined for the given sampling kind.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, divergence, failed factorization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace esokit
