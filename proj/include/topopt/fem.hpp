#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <memory>
#include <vector>

#include "topopt/config.hpp"
#include "topopt/field.hpp"
#include "topopt/grid.hpp"

namespace topopt {

using ElementMatrix = Eigen::Matrix<double, 8, 8>;

// Stiffness matrix of one unit square bilinear plane-stress element with
// Young's modulus E and Poisson ratio nu (exact closed form). Symmetric,
// positive semidefinite with a 3-dimensional rigid-body null space.
// Throws std::invalid_argument for nu outside [0, 0.5) or E <= 0.
ElementMatrix element_stiffness_matrix(double nu, double E);

// Nodal displacements, length 2 * num_nodes, exactly zero at fixed DOFs.
struct DisplacementField {
  std::vector<double> u;
};

// Sparse SPD system over the free DOFs of a grid. The sparsity pattern and
// the symbolic Cholesky factorization depend only on (grid, fixed_dofs) and
// are built once; update_values() refills the numeric entries for a new
// modulus field and invalidates the numeric factorization, which is then
// recomputed lazily on the next solve.
class StiffnessSystem {
 public:
  StiffnessSystem(const Grid& grid, const BoundaryConditions& bc,
                  const ElementMatrix& unit_k0);
  StiffnessSystem(StiffnessSystem&&) noexcept = default;
  StiffnessSystem& operator=(StiffnessSystem&&) noexcept = default;

  // young: per-element Young's modulus, strictly positive.
  void update_values(const DensityField& young);

  // Solves K u = f on the free DOFs. Throws SolverError if the Cholesky
  // factorization fails (structurally unstable task).
  DisplacementField solve(const BoundaryConditions& bc);

  const Eigen::SparseMatrix<double>& matrix() const { return K_; }
  const std::vector<int>& free_of_global() const { return free_of_global_; }
  const std::vector<int>& global_of_free() const { return global_of_free_; }
  const Grid& grid() const { return grid_; }

 private:
  Grid grid_;
  ElementMatrix k0_;
  std::vector<std::array<int, 8>> edof_;
  std::vector<int> free_of_global_;   // -1 for fixed DOFs
  std::vector<int> global_of_free_;
  std::vector<std::array<int, 64>> value_slot_;  // CSC value index, -1 if fixed
  Eigen::SparseMatrix<double> K_;
  std::unique_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> llt_;
  bool factorized_ = false;
};

// One-shot assembly matching the cached path above.
StiffnessSystem assemble(const Grid& grid, const DensityField& young,
                         const BoundaryConditions& bc, const ElementMatrix& unit_k0);

DisplacementField solve(StiffnessSystem& system, const BoundaryConditions& bc);

// Work of the applied loads f.u (equals u^T K u at the solution). Nonnegative.
double compliance(const DisplacementField& u, const BoundaryConditions& bc);

// Per-element strain energy density u_e^T k0 u_e for the unit-modulus element
// matrix; the building block of both compliance cross-checks and the adjoint.
DensityField element_strain_energy(const Grid& grid, const DisplacementField& u,
                                   const ElementMatrix& unit_k0);

// Adjoint gradient of compliance with respect to the physical densities:
//   d c / d x_e = -penal * x_e^(penal-1) * (E0 - Emin) * u_e^T k0 u_e  <= 0.
DensityField compliance_gradient_physical(const Grid& grid, const DisplacementField& u,
                                          const DensityField& xphys,
                                          const SimpConfig& cfg);

}  // namespace topopt
