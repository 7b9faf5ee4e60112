#pragma once

#include <stdexcept>
#include <string>

namespace molbat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on shape or structure was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Input data is malformed (NaN entries, mismatched dimensions, bad ranges).
class InputError : public Error {
 public:
  using Error::Error;
};

/// The requested problem size exceeds what the dense routines support.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// An iterative or algebraic routine did not meet its accuracy target.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// The generator has more than one stationary state.
class NonErgodic : public NumericalFailure {
 public:
  NonErgodic(const std::string& what, int kernel_dim)
      : NumericalFailure(what), kernel_dim_(kernel_dim) {}
  int kernel_dim() const { return kernel_dim_; }

 private:
  int kernel_dim_;
};

/// The Fock truncation is too small for the requested thermal state.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// A modelling invariant (rate sign, detailed balance, ...) does not hold.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace molbat
