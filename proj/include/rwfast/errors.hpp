#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rwfast {

/// Root of every error thrown by the library. The CLI maps subclasses to
/// exit codes (usage / io / numeric), the service maps them to HTTP status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ChecksumMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

class InvalidParam : public Error {
 public:
  using Error::Error;
};

class DimsMismatch : public InvalidParam {
 public:
  using InvalidParam::InvalidParam;
};

class IndexError : public InvalidParam {
 public:
  using InvalidParam::InvalidParam;
};

class ImageMismatch : public InvalidParam {
 public:
  using InvalidParam::InvalidParam;
};

// Numeric failures.

class NumericError : public Error {
 public:
  using Error::Error;
};

class DegenerateGraph : public NumericError {
 public:
  using NumericError::NumericError;
};

class SingularSystem : public NumericError {
 public:
  using NumericError::NumericError;
};

class SingularSmallSystem : public NumericError {
 public:
  SingularSmallSystem(const std::string& what, double rcond)
      : NumericError(what), rcond_(rcond) {}
  double rcond() const { return rcond_; }

 private:
  double rcond_;
};

class InsufficientBasis : public NumericError {
 public:
  using NumericError::NumericError;
};

class ZeroVector : public NumericError {
 public:
  using NumericError::NumericError;
};

class EmptyBasis : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Carries the per-column relative residuals reached before giving up.
class NotConverged : public NumericError {
 public:
  NotConverged(const std::string& what, std::vector<double> residuals)
      : NumericError(what), residuals_(std::move(residuals)) {}
  const std::vector<double>& residuals() const { return residuals_; }

 private:
  std::vector<double> residuals_;
};

}  // namespace rwfast
