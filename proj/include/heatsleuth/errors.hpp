#pragma once

#include <stdexcept>
#include <string>

namespace heatsleuth {

// Bad input: configuration, parameter ranges, argument shapes.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical routine failed in a way that indicates a bug or a degenerate
// system (bracketing failure, singular factorization, lost pairing).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace heatsleuth
