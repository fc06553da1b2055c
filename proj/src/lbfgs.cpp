#include "topopt/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace topopt {

namespace {

struct Pair {
  Eigen::VectorXd s, y;
  double rho;
};

// Two-loop recursion for the search direction -H*g with gamma scaling.
Eigen::VectorXd two_loop_direction(const std::deque<Pair>& mem, const Eigen::VectorXd& g) {
  Eigen::VectorXd q = -g;
  if (mem.empty()) return q;
  std::vector<double> alpha(mem.size());
  for (int i = static_cast<int>(mem.size()) - 1; i >= 0; --i) {
    alpha[i] = mem[i].rho * mem[i].s.dot(q);
    q -= alpha[i] * mem[i].y;
  }
  const Pair& last = mem.back();
  q *= last.s.dot(last.y) / last.y.squaredNorm();
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * mem[i].y.dot(q);
    q += (alpha[i] - beta) * mem[i].s;
  }
  return q;
}

// Minimizer of the quadratic through (a_lo, f_lo, d_lo) and (a_hi, f_hi),
// safeguarded toward bisection when degenerate or too close to the bracket
// endpoints.
double interpolate(double a_lo, double f_lo, double d_lo, double a_hi, double f_hi) {
  const double da = a_hi - a_lo;
  const double denom = 2.0 * (f_hi - f_lo - d_lo * da);
  double trial = (denom != 0.0) ? a_lo - d_lo * da * da / denom : 0.5 * (a_lo + a_hi);
  const double lo = std::min(a_lo, a_hi), hi = std::max(a_lo, a_hi);
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(trial) || !(trial > lo + margin && trial < hi - margin)) {
    trial = 0.5 * (lo + hi);
  }
  return trial;
}

struct LineSearchResult {
  bool ok = false;
  double alpha = 0.0;
  double f = 0.0;
  Eigen::VectorXd g;
  int evals = 0;
};

// Strong Wolfe line search (bracket + zoom). The returned (f, g) always come
// from an evaluation at the accepted step.
LineSearchResult wolfe_line_search(const Objective& obj, const Eigen::VectorXd& x,
                                   double f0, const Eigen::VectorXd& g0,
                                   const Eigen::VectorXd& d, double alpha_init,
                                   const LbfgsOptions& opt) {
  LineSearchResult res;
  const double dphi0 = g0.dot(d);
  if (dphi0 >= 0.0) return res;

  Eigen::VectorXd g(x.size());
  const auto phi = [&](double a, double* dphi) {
    const double f = obj(x + a * d, g);
    ++res.evals;
    *dphi = g.dot(d);
    return f;
  };

  const auto armijo = [&](double a, double f) { return f <= f0 + opt.c1 * a * dphi0; };
  const auto curvature = [&](double dphi) { return std::abs(dphi) <= -opt.c2 * dphi0; };

  const auto zoom = [&](double a_lo, double f_lo, double d_lo, double a_hi, double f_hi) {
    for (int j = 0; j < opt.max_line_search && res.evals < 4 * opt.max_line_search; ++j) {
      const double a = interpolate(a_lo, f_lo, d_lo, a_hi, f_hi);
      double dphi;
      const double f = phi(a, &dphi);
      if (!std::isfinite(f) || !armijo(a, f) || f >= f_lo) {
        a_hi = a;
        f_hi = f;
      } else {
        if (curvature(dphi)) {
          res.ok = true;
          res.alpha = a;
          res.f = f;
          res.g = g;
          return;
        }
        if (dphi * (a_hi - a_lo) >= 0.0) {
          a_hi = a_lo;
          f_hi = f_lo;
        }
        a_lo = a;
        f_lo = f;
        d_lo = dphi;
      }
      if (std::abs(a_hi - a_lo) < 1e-18) break;
    }
    // Bracket collapsed before the curvature condition held; accept the best
    // Armijo point if it decreases f (W1 still holds).
    if (f_lo < f0 && a_lo > 0.0) {
      double dphi;
      const double f = phi(a_lo, &dphi);
      res.ok = std::isfinite(f) && armijo(a_lo, f);
      res.alpha = a_lo;
      res.f = f;
      res.g = g;
    }
  };

  double a_prev = 0.0, f_prev = f0, d_prev = dphi0;
  double a = alpha_init;
  for (int i = 0; i < opt.max_line_search; ++i) {
    double dphi;
    const double f = phi(a, &dphi);
    if (!std::isfinite(f) || !armijo(a, f) || (i > 0 && f >= f_prev)) {
      zoom(a_prev, f_prev, d_prev, a, f);
      return res;
    }
    if (curvature(dphi)) {
      res.ok = true;
      res.alpha = a;
      res.f = f;
      res.g = g;
      return res;
    }
    if (dphi >= 0.0) {
      zoom(a, f, dphi, a_prev, f_prev);
      return res;
    }
    a_prev = a;
    f_prev = f;
    d_prev = dphi;
    a *= 2.0;
  }
  return res;
}

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& objective, Eigen::VectorXd x,
                           const LbfgsOptions& opt, const IterationCallback& callback) {
  LbfgsResult result;
  Eigen::VectorXd g(x.size());
  double f = objective(x, g);
  result.evaluations = 1;
  if (callback) callback(0, x, f, g);

  result.best_x = x;
  result.best_f = f;

  const auto converged = [&]() {
    return g.lpNorm<Eigen::Infinity>() <=
           opt.grad_tolerance * std::max(1.0, x.lpNorm<Eigen::Infinity>());
  };
  if (converged()) {
    result.status = LbfgsStatus::kStationaryInit;
    return result;
  }

  std::deque<Pair> memory;
  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    Eigen::VectorXd d = two_loop_direction(memory, g);
    if (d.dot(g) >= 0.0) {  // not a descent direction; restart from gradient
      memory.clear();
      d = -g;
    }
    const double alpha0 = memory.empty() ? 1.0 / std::max(1.0, g.norm()) : 1.0;
    LineSearchResult ls = wolfe_line_search(objective, x, f, g, d, alpha0, opt);
    result.evaluations += ls.evals;
    if (!ls.ok && memory.size() > 0) {
      // Retry along steepest descent before giving up.
      memory.clear();
      d = -g;
      ls = wolfe_line_search(objective, x, f, g, d, 1.0 / std::max(1.0, g.norm()), opt);
      result.evaluations += ls.evals;
    }
    if (!ls.ok) {
      result.status = LbfgsStatus::kLineSearchFailed;
      return result;
    }

    const Eigen::VectorXd s = ls.alpha * d;
    const Eigen::VectorXd y = ls.g - g;
    x += s;
    f = ls.f;
    g = ls.g;
    result.iterations = iter;
    if (callback) callback(iter, x, f, g);
    if (f < result.best_f) {
      result.best_f = f;
      result.best_x = x;
    }

    const double sy = s.dot(y);
    if (sy > 0.0) {
      memory.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(memory.size()) > opt.memory) memory.pop_front();
    }

    if (converged()) {
      result.status = LbfgsStatus::kConverged;
      return result;
    }
  }
  result.status = LbfgsStatus::kMaxIterations;
  return result;
}

}  // namespace topopt
