#include "topopt/fem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "topopt/errors.hpp"

namespace topopt {

void BoundaryConditions::validate(const Grid& grid) {
  std::sort(fixed_dofs.begin(), fixed_dofs.end());
  fixed_dofs.erase(std::unique(fixed_dofs.begin(), fixed_dofs.end()), fixed_dofs.end());
  if (fixed_dofs.empty()) {
    throw TaskError("boundary conditions: no fixed DOFs (structure would float)");
  }
  const int ndof = grid.num_dofs();
  for (int d : fixed_dofs) {
    if (d < 0 || d >= ndof) {
      throw TaskError("boundary conditions: fixed DOF " + std::to_string(d) +
                      " out of range [0, " + std::to_string(ndof) + ")");
    }
  }
  for (const auto& [d, f] : loads) {
    (void)f;
    if (d < 0 || d >= ndof) {
      throw TaskError("boundary conditions: load DOF " + std::to_string(d) +
                      " out of range [0, " + std::to_string(ndof) + ")");
    }
  }
}

ElementMatrix element_stiffness_matrix(double nu, double E) {
  if (!(nu >= 0.0 && nu < 0.5)) {
    throw std::invalid_argument("element_stiffness_matrix: nu must lie in [0, 0.5)");
  }
  if (!(E > 0.0)) {
    throw std::invalid_argument("element_stiffness_matrix: E must be positive");
  }
  Eigen::Matrix4d A11, A12, B11, B12;
  A11 << 12, 3, -6, -3,
          3, 12, 3, 0,
         -6, 3, 12, -3,
         -3, 0, -3, 12;
  A12 << -6, -3, 0, 3,
         -3, -6, -3, -6,
          0, -3, -6, 3,
          3, -6, 3, -6;
  B11 << -4, 3, -2, 9,
          3, -4, -9, 4,
         -2, -9, -4, -3,
          9, 4, -3, -4;
  B12 << 2, -3, 4, -9,
         -3, 2, 9, -2,
          4, 9, 2, 3,
         -9, -2, 3, 2;
  ElementMatrix a, b;
  a << A11, A12, A12.transpose(), A11;
  b << B11, B12, B12.transpose(), B11;
  return E / (1.0 - nu * nu) / 24.0 * (a + nu * b);
}

StiffnessSystem::StiffnessSystem(const Grid& grid, const BoundaryConditions& bc,
                                 const ElementMatrix& unit_k0)
    : grid_(grid), k0_(unit_k0) {
  const int ndof = grid.num_dofs();

  free_of_global_.assign(ndof, -1);
  for (int d : bc.fixed_dofs) free_of_global_[d] = -2;  // mark fixed
  global_of_free_.clear();
  for (int d = 0; d < ndof; ++d) {
    if (free_of_global_[d] == -1) {
      free_of_global_[d] = static_cast<int>(global_of_free_.size());
      global_of_free_.push_back(d);
    } else {
      free_of_global_[d] = -1;
    }
  }
  const int nfree = static_cast<int>(global_of_free_.size());
  if (nfree == 0) throw TaskError("boundary conditions fix every DOF");

  edof_.reserve(grid.num_elements());
  for (int ex = 0; ex < grid.nelx; ++ex) {
    for (int ey = 0; ey < grid.nely; ++ey) {
      edof_.push_back(grid.element_dofs(ex, ey));
    }
  }

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(grid.num_elements()) * 64);
  for (const auto& dofs : edof_) {
    for (int i = 0; i < 8; ++i) {
      const int fi = free_of_global_[dofs[i]];
      if (fi < 0) continue;
      for (int j = 0; j < 8; ++j) {
        const int fj = free_of_global_[dofs[j]];
        if (fj < 0) continue;
        trips.emplace_back(fi, fj, 1.0);
      }
    }
  }
  K_.resize(nfree, nfree);
  K_.setFromTriplets(trips.begin(), trips.end());
  K_.makeCompressed();

  // Map each element-local (i,j) entry to its slot in the CSC value array so
  // per-iteration reassembly is a plain scatter-add.
  value_slot_.assign(edof_.size(), {});
  const int* outer = K_.outerIndexPtr();
  const int* inner = K_.innerIndexPtr();
  for (std::size_t e = 0; e < edof_.size(); ++e) {
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 8; ++j) {
        const int fi = free_of_global_[edof_[e][i]];
        const int fj = free_of_global_[edof_[e][j]];
        int slot = -1;
        if (fi >= 0 && fj >= 0) {
          const int* begin = inner + outer[fj];
          const int* end = inner + outer[fj + 1];
          const int* it = std::lower_bound(begin, end, fi);
          slot = static_cast<int>(outer[fj] + (it - begin));
        }
        value_slot_[e][i * 8 + j] = slot;
      }
    }
  }

  llt_ = std::make_unique<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>();
  llt_->analyzePattern(K_);
}

void StiffnessSystem::update_values(const DensityField& young) {
  if (young.nelx != grid_.nelx || young.nely != grid_.nely) {
    throw std::invalid_argument("update_values: modulus field shape mismatch");
  }
  for (double e : young.v) {
    if (!(e > 0.0)) {
      throw std::invalid_argument("update_values: Young's modulus must be strictly positive");
    }
  }
  double* values = K_.valuePtr();
  std::fill(values, values + K_.nonZeros(), 0.0);
  for (std::size_t e = 0; e < edof_.size(); ++e) {
    const double ce = young.v[e];
    const auto& slots = value_slot_[e];
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 8; ++j) {
        const int s = slots[i * 8 + j];
        if (s >= 0) values[s] += ce * k0_(i, j);
      }
    }
  }
  factorized_ = false;
}

DisplacementField StiffnessSystem::solve(const BoundaryConditions& bc) {
  if (!factorized_) {
    llt_->factorize(K_);
    if (llt_->info() != Eigen::Success) {
      throw SolverError(
          "stiffness factorization failed: the task is structurally unstable "
          "(insufficient supports)");
    }
    factorized_ = true;
  }
  Eigen::VectorXd f = Eigen::VectorXd::Zero(K_.rows());
  for (const auto& [dof, value] : bc.loads) {
    const int fi = free_of_global_[dof];
    if (fi >= 0) f[fi] += value;
  }
  Eigen::VectorXd uf = llt_->solve(f);
  // One step of iterative refinement; extreme SIMP contrast (Emin vs E0) can
  // leave the raw Cholesky residual above the contract bound.
  const Eigen::VectorXd r = f - K_ * uf;
  if (r.norm() > 1e-10 * std::max(1.0, f.norm())) {
    uf += llt_->solve(r);
  }
  DisplacementField out;
  out.u.assign(grid_.num_dofs(), 0.0);
  for (int i = 0; i < static_cast<int>(global_of_free_.size()); ++i) {
    out.u[global_of_free_[i]] = uf[i];
  }
  return out;
}

StiffnessSystem assemble(const Grid& grid, const DensityField& young,
                         const BoundaryConditions& bc, const ElementMatrix& unit_k0) {
  StiffnessSystem system(grid, bc, unit_k0);
  system.update_values(young);
  return system;
}

DisplacementField solve(StiffnessSystem& system, const BoundaryConditions& bc) {
  return system.solve(bc);
}

double compliance(const DisplacementField& u, const BoundaryConditions& bc) {
  double c = 0.0;
  for (const auto& [dof, value] : bc.loads) {
    c += value * u.u[dof];
  }
  return c;
}

DensityField element_strain_energy(const Grid& grid, const DisplacementField& u,
                                   const ElementMatrix& unit_k0) {
  DensityField ce(grid.nelx, grid.nely, Stage::kPhysical);
  Eigen::Matrix<double, 8, 1> ue;
  for (int ex = 0; ex < grid.nelx; ++ex) {
    for (int ey = 0; ey < grid.nely; ++ey) {
      const auto dofs = grid.element_dofs(ex, ey);
      for (int i = 0; i < 8; ++i) ue[i] = u.u[dofs[i]];
      ce.at(ex, ey) = ue.dot(unit_k0 * ue);
    }
  }
  return ce;
}

DensityField compliance_gradient_physical(const Grid& grid, const DisplacementField& u,
                                          const DensityField& xphys,
                                          const SimpConfig& cfg) {
  const ElementMatrix k0 = element_stiffness_matrix(cfg.nu, 1.0);
  DensityField grad = element_strain_energy(grid, u, k0);
  for (int e = 0; e < grad.count(); ++e) {
    grad.v[e] *= -cfg.penal * std::pow(xphys.v[e], cfg.penal - 1.0) * (cfg.E0 - cfg.Emin);
  }
  grad.stage = Stage::kPhysical;
  return grad;
}

}  // namespace topopt
