#pragma once

#include <stdexcept>
#include <string>

namespace calib {

/// Operands live in different ambient dimensions or variable spaces.
struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A form or frame has the wrong degree/arity for the requested operation.
struct ArityMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Frame spans less than its nominal dimension.
struct DegenerateFrame : std::domain_error {
  using std::domain_error::domain_error;
};

/// Parameters outside a system's admissible set (coprimality, ordering, ...).
struct InvalidParameters : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Initial state violates a constraint the flow requires at t = 0.
struct ConstraintViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Integration could not be completed (step budget, non-finite state).
struct IntegrationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace calib
