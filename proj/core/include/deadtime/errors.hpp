#pragma once

#include <stdexcept>
#include <string>

namespace deadtime {

// A model whose total flux is zero (or otherwise unusable) for the requested operation.
struct DegenerateModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Too few events to form the requested estimate.
struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested a dense structure above the configured memory cap.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation not available for the storage mode of the object (e.g. matrix-free kernels).
struct UnsupportedModeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iterative solver hit its iteration cap; carries the last residual for diagnosis.
struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& what, double last_residual, long iterations)
      : std::runtime_error(what), residual(last_residual), iterations(iterations) {}
  double residual;
  long iterations;
};

}  // namespace deadtime
