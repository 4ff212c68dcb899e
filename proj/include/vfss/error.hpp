#pragma once

#include <stdexcept>
#include <string>

namespace vfss {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad command-line usage. Maps to exit code 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Input data failed validation (malformed files, violated invariants,
/// precondition failures on user-supplied data). Maps to exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

/// An activation map with no positive value; the frame has no localization.
class EmptyActivation : public DataError {
 public:
  EmptyActivation() : DataError("activation map is identically zero") {}
};

}  // namespace vfss
