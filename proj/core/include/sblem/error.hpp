#pragma once

#include <stdexcept>
#include <string>

namespace sblem {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input violates a model, dataset or configuration invariant.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A factorization or recursion broke down (non-PD covariance, NaN, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// An exhaustive routine was asked to enumerate beyond its hard cap.
class SizeCapExceeded : public Error {
 public:
  using Error::Error;
};

}  // namespace sblem
