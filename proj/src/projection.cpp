#include "topopt/projection.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace topopt {

namespace {

constexpr double kConvergedTol = 1e-8;  // contract tolerance on |V(b) - V0|
constexpr int kMaxIterations = 200;

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double volume_at(const DensityField& logits, double b) {
  double s = 0.0;
  for (double l : logits.v) s += sigmoid(b - l);
  return s / static_cast<double>(logits.v.size());
}

}  // namespace

ProjectionResult project(const DensityField& logits, double V0) {
  if (!(V0 > 0.0 && V0 < 1.0)) {
    throw std::invalid_argument("project: V0 must lie strictly in (0,1)");
  }
  if (logits.v.empty()) throw std::invalid_argument("project: empty field");
  for (double l : logits.v) {
    if (std::isnan(l)) throw std::invalid_argument("project: NaN logit");
  }

  // Sigmoids saturate past +-40 in double precision, so this bracket already
  // straddles the root for finite logits; expansion is a safety net.
  double lo = logits.min_value() - 40.0;
  double hi = logits.max_value() + 40.0;
  for (int k = 0; k < 64 && volume_at(logits, lo) > V0; ++k) lo -= (hi - lo);
  for (int k = 0; k < 64 && volume_at(logits, hi) < V0; ++k) hi += (hi - lo);

  // Run the bisection all the way to bracket exhaustion: the leftover shift
  // error is then at double resolution, so finite differences through the
  // whole forward pass see an essentially exact b (the 1e-8 contract
  // tolerance alone would leave visible root-finding noise).
  double best_b = 0.5 * (lo + hi);
  double best_gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
  while (iterations < kMaxIterations) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    ++iterations;
    const double gap = volume_at(logits, mid) - V0;
    if (std::abs(gap) < best_gap) {
      best_gap = std::abs(gap);
      best_b = mid;
    }
    if (gap == 0.0) break;
    if (gap < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  ProjectionResult res;
  res.b = best_b;
  res.iterations = iterations;
  res.converged = best_gap <= kConvergedTol;
  res.x = DensityField(logits.nelx, logits.nely, Stage::kConstrained);
  for (int e = 0; e < logits.count(); ++e) {
    res.x.v[e] = sigmoid(best_b - logits.v[e]);
  }
  return res;
}

DensityField project_backward(const ProjectionResult& result, const DensityField& grad_x) {
  const DensityField& x = result.x;
  if (!x.same_shape(grad_x)) {
    throw std::invalid_argument("project_backward: gradient shape mismatch");
  }
  double s_sum = 0.0, gs_sum = 0.0;
  for (int e = 0; e < x.count(); ++e) {
    const double s = x.v[e] * (1.0 - x.v[e]);
    s_sum += s;
    gs_sum += grad_x.v[e] * s;
  }
  if (s_sum == 0.0) {
    throw std::runtime_error("project_backward: all sigmoids saturated (degenerate logits)");
  }
  const double correction = gs_sum / s_sum;
  DensityField out(x.nelx, x.nely, Stage::kLogits);
  for (int e = 0; e < x.count(); ++e) {
    const double s = x.v[e] * (1.0 - x.v[e]);
    out.v[e] = s * (correction - grad_x.v[e]);
  }
  return out;
}

}  // namespace topopt
