#include "topopt/simp.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace topopt {

DensityField young_modulus(const DensityField& xphys, const SimpConfig& cfg) {
  DensityField young(xphys.nelx, xphys.nely, Stage::kPhysical);
  for (int e = 0; e < xphys.count(); ++e) {
    young.v[e] = cfg.Emin + std::pow(xphys.v[e], cfg.penal) * (cfg.E0 - cfg.Emin);
  }
  return young;
}

ConeFilter::ConeFilter(int nelx, int nely, double radius)
    : nelx_(nelx), nely_(nely), radius_(radius) {
  if (radius < 1.0) throw std::invalid_argument("ConeFilter: radius must be >= 1");
  const int reach = static_cast<int>(std::ceil(radius)) - 1;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(nelx) * nely * (2 * reach + 1) * (2 * reach + 1));
  for (int ex = 0; ex < nelx; ++ex) {
    for (int ey = 0; ey < nely; ++ey) {
      const int row = ex * nely + ey;
      double wsum = 0.0;
      const int x_lo = std::max(ex - reach, 0), x_hi = std::min(ex + reach, nelx - 1);
      const int y_lo = std::max(ey - reach, 0), y_hi = std::min(ey + reach, nely - 1);
      for (int jx = x_lo; jx <= x_hi; ++jx) {
        for (int jy = y_lo; jy <= y_hi; ++jy) {
          const double d = std::hypot(double(ex - jx), double(ey - jy));
          const double w = radius - d;
          if (w > 0.0) wsum += w;
        }
      }
      for (int jx = x_lo; jx <= x_hi; ++jx) {
        for (int jy = y_lo; jy <= y_hi; ++jy) {
          const double d = std::hypot(double(ex - jx), double(ey - jy));
          const double w = radius - d;
          if (w > 0.0) trips.emplace_back(row, jx * nely + jy, w / wsum);
        }
      }
    }
  }
  F_.resize(nelx * nely, nelx * nely);
  F_.setFromTriplets(trips.begin(), trips.end());
  F_.makeCompressed();
}

DensityField ConeFilter::apply(const DensityField& x) const {
  if (x.nelx != nelx_ || x.nely != nely_) {
    throw std::invalid_argument("ConeFilter::apply: field/filter dimension mismatch");
  }
  DensityField out(nelx_, nely_, Stage::kPhysical);
  Eigen::Map<const Eigen::VectorXd> xin(x.v.data(), x.v.size());
  Eigen::Map<Eigen::VectorXd>(out.v.data(), out.v.size()) = F_ * xin;
  return out;
}

DensityField ConeFilter::adjoint(const DensityField& g) const {
  if (g.nelx != nelx_ || g.nely != nely_) {
    throw std::invalid_argument("ConeFilter::adjoint: field/filter dimension mismatch");
  }
  DensityField out(nelx_, nely_, g.stage);
  Eigen::Map<const Eigen::VectorXd> gin(g.v.data(), g.v.size());
  Eigen::Map<Eigen::VectorXd>(out.v.data(), out.v.size()) = F_.transpose() * gin;
  return out;
}

DensityField cone_filter_apply(const DensityField& x, const ConeFilter& f) {
  return f.apply(x);
}

DensityField cone_filter_adjoint(const DensityField& g, const ConeFilter& f) {
  return f.adjoint(g);
}

ComplianceProblem::ComplianceProblem(const Task& task, const SimpConfig& cfg)
    : cfg_(cfg),
      grid_(task.grid()),
      volume_fraction_(task.volume_fraction),
      bc_(task.boundary_conditions()),
      filter_(task.nelx, task.nely, cfg.filter_radius),
      system_(grid_, bc_, element_stiffness_matrix(cfg.nu, 1.0)) {}

ObjectiveResult ComplianceProblem::evaluate(const DensityField& x) {
  if (x.nelx != grid_.nelx || x.nely != grid_.nely) {
    throw std::invalid_argument("ComplianceProblem::evaluate: field shape mismatch");
  }
  ObjectiveResult res;
  res.xphys = filter_.apply(x);
  system_.update_values(young_modulus(res.xphys, cfg_));
  DisplacementField u = system_.solve(bc_);
  res.compliance = compliance(u, bc_);
  DensityField grad_phys = compliance_gradient_physical(grid_, u, res.xphys, cfg_);
  res.grad_x = filter_.adjoint(grad_phys);
  res.grad_x.stage = Stage::kConstrained;
  return res;
}

ObjectiveResult objective_and_gradient(const DensityField& x, const Task& task,
                                       const SimpConfig& cfg) {
  ComplianceProblem problem(task, cfg);
  return problem.evaluate(x);
}

}  // namespace topopt
