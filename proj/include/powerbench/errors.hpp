#pragma once

#include <stdexcept>
#include <string>

namespace powerbench {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// its exit codes (config -> 2, invariant -> 3, calibration -> 4).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the operation's domain (off-grid frequency, u > 1, ...).
class InputDomainError : public Error {
public:
  using Error::Error;
};

/// Unknown socket, core or container.
class LookupError : public Error {
public:
  using Error::Error;
};

/// Inconsistent scenario or deployment (double pinning, no free cores, ...).
class ConfigurationError : public Error {
public:
  using Error::Error;
};

/// A model invariant was found broken at runtime.
class InvariantViolation : public Error {
public:
  using Error::Error;
};

class EmptyInputError : public Error {
public:
  using Error::Error;
};

/// Outlier trimming would discard more than the allowed fraction.
class DataQualityError : public Error {
public:
  using Error::Error;
};

class BaselineRejected : public Error {
public:
  using Error::Error;
};

class UndefinedCvError : public Error {
public:
  using Error::Error;
};

class CalibrationError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace powerbench
