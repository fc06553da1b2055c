#pragma once

#include "topopt/field.hpp"

namespace topopt {

struct OcOptions {
  double move_limit = 0.2;
  double eta = 0.5;           // update exponent
  double volume_tol = 1e-9;   // |mean(x_new) - V0| target for the lambda bisection
  int max_bisection = 256;
};

struct OcState {
  DensityField x;  // constrained densities, mean(x) = V0
  OcOptions options;
  int iteration = 0;
};

// One Optimality Criteria update: x <- clamp(x * (-g / lambda)^eta) within the
// move limit and [0,1], with the Lagrange multiplier lambda found by bisection
// so that mean(x_new) = V0. The sensitivity g must be elementwise <= 0 (tiny
// positive roundoff is clamped); throws std::invalid_argument otherwise and
// std::runtime_error if the bisection cannot reach the volume target
// (inconsistent gradient signs).
OcState oc_step(const OcState& state, const DensityField& sensitivity, double V0);

}  // namespace topopt
