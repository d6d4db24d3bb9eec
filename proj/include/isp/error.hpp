#pragma once

#include <stdexcept>
#include <string>

namespace isp {

// Numerical failure; the CLI maps it to exit code 2.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VanishingMass : NumericalError {
  double mass;
  VanishingMass(const std::string& what, double m) : NumericalError(what), mass(m) {}
};

// Bad input; exit code 1.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace isp
