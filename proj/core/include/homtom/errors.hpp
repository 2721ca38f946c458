#pragma once

#include <stdexcept>
#include <string>

namespace homtom {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or out-of-domain input (bad efficiency, bad dimension, malformed
// file, ...).  The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Negative or otherwise impossible Fock index.
class IndexError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Detector efficiency at or below the 1/2 threshold where the noise
// deconvolution kernels cease to exist.
class EfficiencyTooLow : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Requested Fock-space cutoff discards too much state weight.
class TruncationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Too few samples for the requested statistical operation.
class InsufficientData : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Correction basis is numerically rank deficient beyond repair.
class SingularBasis : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A record bin that the estimator requires is empty.
class EmptyOutcomeBin : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A series or quadrature failed to converge to tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// An iterative optimizer hit its iteration budget before meeting its
// stopping rule.  The CLI maps this to exit code 3.
class NotConverged : public Error {
 public:
  using Error::Error;
};

// Floating point breakdown (vanishing probabilities, singular systems).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// File read/write failure.  The CLI maps this to exit code 4.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace homtom
