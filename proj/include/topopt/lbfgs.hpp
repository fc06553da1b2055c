#pragma once

#include <Eigen/Dense>

#include <functional>

namespace topopt {

// Objective: fills grad (same size as x) and returns the loss.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

// Invoked once for the initial point (iter 0) and once per accepted iterate.
using IterationCallback =
    std::function<void(int iter, const Eigen::VectorXd& x, double f, const Eigen::VectorXd& g)>;

struct LbfgsOptions {
  int memory = 10;
  int max_iterations = 200;
  // Stop when ||g||_inf <= grad_tolerance * max(1, ||x||_inf).
  double grad_tolerance = 1e-9;
  double c1 = 1e-4;  // sufficient decrease (Armijo)
  double c2 = 0.9;   // strong Wolfe curvature
  int max_line_search = 25;
};

enum class LbfgsStatus {
  kConverged,        // gradient tolerance met
  kMaxIterations,
  kStationaryInit,   // initial gradient already below tolerance
  kLineSearchFailed, // no acceptable step even along steepest descent
};

struct LbfgsResult {
  Eigen::VectorXd best_x;
  double best_f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  LbfgsStatus status = LbfgsStatus::kMaxIterations;
};

// Limited-memory BFGS with two-loop recursion and a strong Wolfe line search.
// Curvature pairs with s.y <= 0 are skipped; a failed line search falls back
// to steepest descent with backtracking, and repeated failure terminates with
// the best iterate seen. Returns the lowest-loss accepted iterate, not the
// last one.
LbfgsResult lbfgs_minimize(const Objective& objective, Eigen::VectorXd init,
                           const LbfgsOptions& options = {},
                           const IterationCallback& callback = nullptr);

}  // namespace topopt
