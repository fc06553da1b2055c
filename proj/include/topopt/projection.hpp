#pragma once

#include "topopt/field.hpp"

namespace topopt {

struct ProjectionResult {
  DensityField x;        // constrained densities, mean(x) = V0
  double b = 0.0;        // sigmoid shift
  bool converged = false;
  int iterations = 0;
};

// Maps unconstrained logits to densities with mean exactly V0 via the shifted
// sigmoid x_ij = 1 / (1 + exp(xhat_ij - b)). Note the sign: x decreases as
// xhat increases. b is found by binary search on the (strictly increasing)
// volume V(b); the bracket starts at [min(xhat)-40, max(xhat)+40] and expands
// geometrically if needed. The search runs to ~1e-13 volume error or bracket
// exhaustion; converged requires |mean(x) - V0| <= 1e-8.
// Throws std::invalid_argument on NaN logits or V0 outside (0,1).
ProjectionResult project(const DensityField& logits, double V0);

// Exact gradient of the projection via implicit differentiation of the volume
// constraint: with s_ij = x_ij (1 - x_ij) and S = sum(s),
//   db/dxhat_kl       = s_kl / S,
//   (J^T g)_kl        = s_kl * (sum(g*s)/S - g_kl).
// Every Jacobian column sums to zero (volume is pinned), so a uniform g maps
// to the zero field. Throws std::runtime_error when all sigmoids are
// saturated (S = 0).
DensityField project_backward(const ProjectionResult& result, const DensityField& grad_x);

}  // namespace topopt
