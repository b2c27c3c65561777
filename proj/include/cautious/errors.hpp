#pragma once

#include <stdexcept>
#include <string>

namespace cautious {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed user input: bad config values, unreadable files, schema problems.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A mathematical precondition does not hold for the given data.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// The quadratic set has no negative definite (2,2) block.
class UnboundedSetError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// The quadratic set is empty (negative Schur complement).
class EmptySetError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class NonsmoothPointError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class InfeasibleError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class ConvexityError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// A numerical solver did not reach its certified tolerance.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace cautious
