#pragma once

#include <stdexcept>
#include <string>

namespace delaynet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or invariant-violating input (files, parameters).
class InputError : public Error {
 public:
  using Error::Error;
};

// The system leaves the spectral box where the analysis is defined.
class StabilityError : public Error {
 public:
  using Error::Error;
};

// A scalar function hit its guard band at some eigenvalue.
class SingularityError : public Error {
 public:
  using Error::Error;
};

// No feasible starting point for a constrained problem.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Iterative method exceeded its cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace delaynet
