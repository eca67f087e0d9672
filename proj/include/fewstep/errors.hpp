#pragma once

#include <stdexcept>
#include <string>

namespace fewstep {

// Bad input: wrong shapes, out-of-range parameters, malformed files.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input is well formed but the requested quantity is undefined there
// (t = 1 in a velocity conversion, sigma = 0 in the EDM velocity, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A computation produced NaN/inf or diverged.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A score is not defined for the given inputs (e.g. no qualifying pairs).
class UndefinedScore : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fewstep
