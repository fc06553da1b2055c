#include "topopt/oc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace topopt {

namespace {

void apply_update(const DensityField& x, const DensityField& neg_grad, double lambda,
                  const OcOptions& opt, DensityField* out) {
  for (int e = 0; e < x.count(); ++e) {
    const double xe = x.v[e];
    const double candidate = xe * std::pow(neg_grad.v[e] / lambda, opt.eta);
    out->v[e] = std::max(0.0, std::max(xe - opt.move_limit,
                 std::min(1.0, std::min(xe + opt.move_limit, candidate))));
  }
}

}  // namespace

OcState oc_step(const OcState& state, const DensityField& sensitivity, double V0) {
  const DensityField& x = state.x;
  if (!x.same_shape(sensitivity)) {
    throw std::invalid_argument("oc_step: sensitivity shape mismatch");
  }
  DensityField neg_grad(x.nelx, x.nely, Stage::kConstrained);
  for (int e = 0; e < x.count(); ++e) {
    const double g = sensitivity.v[e];
    if (g > 1e-12) {
      throw std::invalid_argument(
          "oc_step: compliance sensitivity must be nonpositive everywhere");
    }
    neg_grad.v[e] = std::max(0.0, -g);
  }

  OcState next = state;
  next.iteration = state.iteration + 1;
  next.x.stage = Stage::kConstrained;

  // V(lambda) = mean(update(lambda)) decreases monotonically from
  // mean(min(1, x+move)) >= V0 to mean(max(0, x-move)) <= V0, so a root
  // exists; the bracket grows if the classic 1e9 cap is too small.
  double lo = 0.0, hi = 1e9;
  const OcOptions& opt = state.options;
  for (int k = 0; k < 60; ++k) {
    apply_update(x, neg_grad, hi, opt, &next.x);
    if (next.x.mean() <= V0) break;
    hi *= 16.0;
  }
  for (int it = 0; it < opt.max_bisection; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    apply_update(x, neg_grad, mid, opt, &next.x);
    const double vol = next.x.mean();
    if (std::abs(vol - V0) <= opt.volume_tol) return next;
    if (vol > V0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (std::abs(next.x.mean() - V0) <= 1e-6) return next;
  throw std::runtime_error(
      "oc_step: volume bisection failed to converge (inconsistent gradient signs)");
}

}  // namespace topopt
