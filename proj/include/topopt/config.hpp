#pragma once

namespace topopt {

// Material and interpolation constants for the modified SIMP law
//   E(x) = Emin + x^penal * (E0 - Emin)
// plus the cone-filter radius. Emin > 0 keeps the stiffness matrix
// positive definite even for fully void elements.
struct SimpConfig {
  double penal = 3.0;
  double E0 = 1.0;
  double Emin = 1e-9;
  double nu = 0.3;
  double filter_radius = 2.0;
};

}  // namespace topopt
