#pragma once

#include <stdexcept>
#include <string>

namespace qmasearch {

/// Base of every error raised by the library. Messages are prefixed with the
/// module that raised them ("linalg: ...", "oracle: ...").
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument shape: index out of range, support mismatch, non-Hermitian input.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Problem exceeds the dense desk-scale ceiling.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition on parameters does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// The convex solver could not certify its answer within the iteration budget.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

/// Malformed input document.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line) : Error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace qmasearch
