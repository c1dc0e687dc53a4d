#pragma once

#include <stdexcept>
#include <string>

namespace canreg {

// Input/contract violations: malformed files, bad dimensions, precondition
// failures. The CLI maps these to exit status 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures of the numerics themselves: non-convergence, singular matrices,
// degenerate cross-validation. The CLI maps these to exit status 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace canreg
