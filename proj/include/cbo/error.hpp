#pragma once

#include <stdexcept>
#include <string>

namespace cbo {

/// Base class for all errors raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller passed a value outside an operation's domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// GP hyperparameter fitting could not produce a positive-definite model.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Every acquisition candidate evaluated to a non-finite value.
class AcquisitionError : public Error {
 public:
  using Error::Error;
};

}  // namespace cbo
