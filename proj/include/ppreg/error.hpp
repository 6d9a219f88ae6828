#ifndef PPREG_ERROR_HPP
#define PPREG_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ppreg {

// Mirrors ppreg_status in ppreg.h; the C layer maps one onto the other.
enum class ErrorCode {
  usage = 1,
  data = 2,
  numerical = 3,
  domain = 4,
  unsupported = 5,
  internal = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Location or argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorCode::domain, what) {}
};

// Malformed or inconsistent input data (files, grids, windows).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCode::data, what) {}
};

// Invalid configuration or parameter values.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(ErrorCode::usage, what) {}
};

// Solver divergence, singular matrices, non-finite intensities.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorCode::numerical, what) {}
};

class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& what) : Error(ErrorCode::unsupported, what) {}
};

}  // namespace ppreg

#endif  // PPREG_ERROR_HPP
