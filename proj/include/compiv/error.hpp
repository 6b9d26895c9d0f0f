#pragma once

#include <stdexcept>
#include <string>

namespace compiv {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation (negative parts,
/// zeros under a logarithm, non-finite values, bad parameters).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input that is formally valid but carries no information (all-zero
/// vectors, empty batches).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Design matrix rank deficient or too badly conditioned to invert.
class RankDeficientError : public Error {
 public:
  using Error::Error;
};

/// Fewer instruments than treatment dimensions.
class UnderIdentifiedError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver ran out of iterations. Concrete solvers derive from
/// this to attach their best-so-far state.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace compiv
