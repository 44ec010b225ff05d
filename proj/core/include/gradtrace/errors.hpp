#ifndef GRADTRACE_ERRORS_HPP
#define GRADTRACE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gradtrace {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed container: bad magic, unsupported version, unknown dtype.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Header and payload disagree (truncated file, trailing bytes, ragged rows).
class CorruptionError : public Error {
 public:
  using Error::Error;
};

// Data fails a content check (non-finite entry, empty input).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad parameter values (predictor family parameters, epsilon out of range).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Operands have incompatible shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// The requested quantity has no value on this input (zero energy).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Iteration failed to converge, or a trajectory left the finite range.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Step-size tuning is degenerate because the residual path is zero.
class DegenerateTuningError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure (cannot open, short write).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gradtrace

#endif
