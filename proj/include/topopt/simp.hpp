#pragma once

#include <Eigen/Sparse>

#include "topopt/config.hpp"
#include "topopt/fem.hpp"
#include "topopt/field.hpp"
#include "topopt/task.hpp"

namespace topopt {

// Modified SIMP interpolation E(x) = Emin + x^penal (E0 - Emin), applied
// elementwise to physical densities in [0,1].
DensityField young_modulus(const DensityField& xphys, const SimpConfig& cfg);

// Linear density filter with conically decaying weights
// w(d) = max(0, radius - d), d = center distance in element units, normalized
// to sum 1 per output element (row-stochastic). Constant fields pass through
// unchanged; near boundaries the weights renormalize over the truncated
// neighborhood.
class ConeFilter {
 public:
  ConeFilter(int nelx, int nely, double radius);

  DensityField apply(const DensityField& x) const;      // x -> xphys
  DensityField adjoint(const DensityField& g) const;    // exact transpose action

  int nelx() const { return nelx_; }
  int nely() const { return nely_; }
  double radius() const { return radius_; }
  const Eigen::SparseMatrix<double>& matrix() const { return F_; }

 private:
  int nelx_, nely_;
  double radius_;
  Eigen::SparseMatrix<double> F_;
};

DensityField cone_filter_apply(const DensityField& x, const ConeFilter& f);
DensityField cone_filter_adjoint(const DensityField& g, const ConeFilter& f);

struct ObjectiveResult {
  double compliance = 0.0;
  DensityField grad_x;    // d compliance / d x (constrained densities)
  DensityField xphys;
};

// Compliance of a design and its gradient with respect to the constrained
// densities, chaining filter -> SIMP -> solve -> adjoint -> filter transpose.
// Caches the filter, element matrix, DOF maps, and the symbolic factorization
// across evaluations of the same task.
class ComplianceProblem {
 public:
  ComplianceProblem(const Task& task, const SimpConfig& cfg);

  ObjectiveResult evaluate(const DensityField& x);

  const Grid& grid() const { return grid_; }
  const SimpConfig& config() const { return cfg_; }
  const ConeFilter& filter() const { return filter_; }
  const BoundaryConditions& boundary_conditions() const { return bc_; }
  double volume_fraction() const { return volume_fraction_; }

 private:
  SimpConfig cfg_;
  Grid grid_;
  double volume_fraction_;
  BoundaryConditions bc_;
  ConeFilter filter_;
  StiffnessSystem system_;
};

// One-shot convenience wrapper around ComplianceProblem.
ObjectiveResult objective_and_gradient(const DensityField& x, const Task& task,
                                       const SimpConfig& cfg);

}  // namespace topopt
