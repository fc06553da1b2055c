#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "support/oracles.hpp"
#include "topopt/simp.hpp"
#include "topopt/task.hpp"

using namespace topopt;

TEST_SUITE("simp") {

TEST_CASE("young modulus hits both material limits and the p=3 midpoint") {
  SimpConfig cfg;
  DensityField x(3, 1, Stage::kPhysical);
  x.v = {0.0, 1.0, 0.5};
  const DensityField young = young_modulus(x, cfg);
  CHECK(young.v[0] == doctest::Approx(1e-9).epsilon(1e-12));
  CHECK(young.v[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(young.v[2] == doctest::Approx(1e-9 + 0.125 * (1.0 - 1e-9)).epsilon(1e-12));
}

TEST_CASE("young modulus stays in [Emin, E0] and increases with density") {
  SimpConfig cfg;
  oracles::TestRng rng(2);
  DensityField x(8, 8, Stage::kPhysical);
  for (auto& v : x.v) v = rng.uniform();
  const DensityField young = young_modulus(x, cfg);
  for (double e : young.v) {
    CHECK(e >= cfg.Emin);
    CHECK(e <= cfg.E0);
  }
  DensityField a(1, 1, Stage::kPhysical, 0.3), b(1, 1, Stage::kPhysical, 0.31);
  CHECK(young_modulus(b, cfg).v[0] > young_modulus(a, cfg).v[0]);
}

TEST_CASE("cone filter preserves constant fields") {
  const ConeFilter f(12, 7, 2.0);
  DensityField x(12, 7, Stage::kConstrained, 0.4);
  const DensityField y = f.apply(x);
  for (double v : y.v) CHECK(v == doctest::Approx(0.4).epsilon(1e-13));
}

TEST_CASE("interior impulse response matches the brute-force stencil") {
  const int nelx = 9, nely = 9;
  const ConeFilter f(nelx, nely, 2.0);
  const Eigen::MatrixXd oracle = oracles::dense_cone_filter(nelx, nely, 2.0);

  DensityField impulse(nelx, nely, Stage::kConstrained, 0.0);
  impulse.at(4, 4) = 1.0;
  const DensityField resp = f.apply(impulse);

  int nonzero = 0;
  for (int e = 0; e < resp.count(); ++e) {
    CHECK(resp.v[e] == doctest::Approx(oracle(e, impulse.index(4, 4))).epsilon(1e-13));
    if (resp.v[e] != 0.0) ++nonzero;
  }
  // Radius 2 reaches the 4 axis neighbors (d=1) and 4 diagonals (d=sqrt(2)).
  CHECK(nonzero == 9);
  const double wsum = 2.0 + 4.0 * 1.0 + 4.0 * (2.0 - std::sqrt(2.0));
  CHECK(resp.at(4, 4) == doctest::Approx(2.0 / wsum).epsilon(1e-13));
  CHECK(resp.at(5, 4) == doctest::Approx(1.0 / wsum).epsilon(1e-13));
}

TEST_CASE("corner impulse response renormalizes over the truncated neighborhood") {
  const int nelx = 6, nely = 5;
  const ConeFilter f(nelx, nely, 2.0);
  const Eigen::MatrixXd oracle = oracles::dense_cone_filter(nelx, nely, 2.0);
  DensityField impulse(nelx, nely, Stage::kConstrained, 0.0);
  impulse.at(0, 0) = 1.0;
  const DensityField resp = f.apply(impulse);
  for (int e = 0; e < resp.count(); ++e) {
    CHECK(resp.v[e] == doctest::Approx(oracle(e, 0)).epsilon(1e-13));
  }
  // Filtering the all-ones field must still give ones at the corner.
  DensityField ones(nelx, nely, Stage::kConstrained, 1.0);
  CHECK(f.apply(ones).at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("filter rows sum to one") {
  const ConeFilter f(11, 6, 2.0);
  DensityField ones(11, 6, Stage::kConstrained, 1.0);
  const DensityField out = f.apply(ones);
  for (double v : out.v) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("adjoint equals the dense transpose and satisfies the pairing identity") {
  const int nelx = 6, nely = 6;
  const ConeFilter f(nelx, nely, 2.0);
  const Eigen::MatrixXd dense = oracles::dense_cone_filter(nelx, nely, 2.0);
  oracles::TestRng rng(5);

  DensityField g(nelx, nely, Stage::kPhysical);
  for (auto& v : g.v) v = rng.uniform(-1.0, 1.0);
  const DensityField adj = f.adjoint(g);
  Eigen::VectorXd gv(g.count());
  for (int e = 0; e < g.count(); ++e) gv[e] = g.v[e];
  const Eigen::VectorXd expect = dense.transpose() * gv;
  for (int e = 0; e < g.count(); ++e) {
    CHECK(adj.v[e] == doctest::Approx(expect[e]).epsilon(1e-12));
  }

  // A uniform gradient field maps to a non-uniform one on a bordered grid.
  DensityField uniform(nelx, nely, Stage::kPhysical, 1.0);
  const DensityField adj_uniform = f.adjoint(uniform);
  CHECK(adj_uniform.at(0, 0) != doctest::Approx(adj_uniform.at(3, 3)).epsilon(1e-6));

  for (int trial = 0; trial < 4; ++trial) {
    DensityField x(nelx, nely, Stage::kConstrained), y(nelx, nely, Stage::kPhysical);
    for (auto& v : x.v) v = rng.uniform(-1.0, 1.0);
    for (auto& v : y.v) v = rng.uniform(-1.0, 1.0);
    double lhs = 0.0, rhs = 0.0;
    const DensityField fx = f.apply(x);
    const DensityField fty = f.adjoint(y);
    for (int e = 0; e < x.count(); ++e) {
      lhs += fx.v[e] * y.v[e];
      rhs += x.v[e] * fty.v[e];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("adjoint is the exact derivative of a loss through the filter") {
  const int nelx = 5, nely = 4;
  const ConeFilter f(nelx, nely, 2.0);
  oracles::TestRng rng(9);
  Eigen::VectorXd a(nelx * nely), b(nelx * nely), x0(nelx * nely);
  for (int e = 0; e < nelx * nely; ++e) {
    a[e] = rng.uniform(-1.0, 1.0);
    b[e] = rng.uniform(0.1, 1.0);
    x0[e] = rng.uniform(0.2, 0.8);
  }
  const auto loss = [&](const Eigen::VectorXd& xv) {
    DensityField x(nelx, nely, Stage::kConstrained);
    for (int e = 0; e < x.count(); ++e) x.v[e] = xv[e];
    const DensityField y = f.apply(x);
    double l = 0.0;
    for (int e = 0; e < y.count(); ++e) l += a[e] * y.v[e] + b[e] * y.v[e] * y.v[e];
    return l;
  };
  DensityField x(nelx, nely, Stage::kConstrained);
  for (int e = 0; e < x.count(); ++e) x.v[e] = x0[e];
  const DensityField y = f.apply(x);
  DensityField gy(nelx, nely, Stage::kPhysical);
  for (int e = 0; e < y.count(); ++e) gy.v[e] = a[e] + 2.0 * b[e] * y.v[e];
  const DensityField gx = f.adjoint(gy);

  const Eigen::VectorXd fd = oracles::central_difference(loss, x0, 1e-6);
  Eigen::VectorXd an(x.count());
  for (int e = 0; e < x.count(); ++e) an[e] = gx.v[e];
  CHECK(oracles::relative_gradient_error(an, fd) < 1e-6);
}

TEST_CASE("filter and adjoint reject mismatched dimensions") {
  const ConeFilter f(4, 4, 2.0);
  DensityField wrong(5, 4, Stage::kConstrained, 0.5);
  CHECK_THROWS_AS(f.apply(wrong), std::invalid_argument);
  CHECK_THROWS_AS(f.adjoint(wrong), std::invalid_argument);
}

TEST_CASE("objective on the uniform MBB design is positive with nonpositive gradient") {
  const Task task = *find_builtin_task("mbb_beam_60x20");
  DensityField x(task.nelx, task.nely, Stage::kConstrained, task.volume_fraction);
  const ObjectiveResult res = objective_and_gradient(x, task, task.simp);
  CHECK(res.compliance > 0.0);
  CHECK(std::isfinite(res.compliance));
  for (double g : res.grad_x.v) CHECK(g <= 0.0);
}

TEST_CASE("full-chain gradient matches finite differences on a random 6x4 instance") {
  Task task;
  task.name = "fd_probe_6x4";
  task.nelx = 6;
  task.nely = 4;
  task.volume_fraction = 0.5;
  task.fixed = {{NodeSelector::parse("edge: left"), true, true}};
  task.loads = {{NodeSelector::parse("point: 6, 2"), 0.0, -1.0}};

  oracles::TestRng rng(31);
  Eigen::VectorXd x0(task.num_elements());
  for (int e = 0; e < task.num_elements(); ++e) x0[e] = rng.uniform(0.2, 0.9);

  ComplianceProblem problem(task, task.simp);
  DensityField x(task.nelx, task.nely, Stage::kConstrained);
  for (int e = 0; e < x.count(); ++e) x.v[e] = x0[e];
  const ObjectiveResult res = problem.evaluate(x);

  const auto f = [&](const Eigen::VectorXd& xv) {
    DensityField xx(task.nelx, task.nely, Stage::kConstrained);
    for (int e = 0; e < xx.count(); ++e) xx.v[e] = xv[e];
    return problem.evaluate(xx).compliance;
  };
  const Eigen::VectorXd fd = oracles::central_difference(f, x0, 1e-6);
  Eigen::VectorXd an(x.count());
  for (int e = 0; e < x.count(); ++e) an[e] = res.grad_x.v[e];
  CHECK(oracles::relative_gradient_error(an, fd) < 1e-5);
}

TEST_CASE("end-to-end adjoint fidelity within 1e-4 on an 8x8 instance") {
  Task task;
  task.name = "fd_probe_8x8";
  task.nelx = 8;
  task.nely = 8;
  task.volume_fraction = 0.4;
  task.fixed = {{NodeSelector::parse("edge: left"), true, true}};
  task.loads = {{NodeSelector::parse("point: 8, 4"), 0.0, -1.0}};

  oracles::TestRng rng(37);
  Eigen::VectorXd x0(task.num_elements());
  for (int e = 0; e < task.num_elements(); ++e) x0[e] = rng.uniform(0.15, 0.95);
  ComplianceProblem problem(task, task.simp);
  const auto f = [&](const Eigen::VectorXd& xv) {
    DensityField xx(task.nelx, task.nely, Stage::kConstrained);
    for (int e = 0; e < xx.count(); ++e) xx.v[e] = xv[e];
    return problem.evaluate(xx).compliance;
  };
  DensityField x(task.nelx, task.nely, Stage::kConstrained);
  for (int e = 0; e < x.count(); ++e) x.v[e] = x0[e];
  const ObjectiveResult res = problem.evaluate(x);
  const Eigen::VectorXd fd = oracles::central_difference(f, x0, 1e-6);
  Eigen::VectorXd an(x.count());
  for (int e = 0; e < x.count(); ++e) an[e] = res.grad_x.v[e];
  CHECK(oracles::relative_gradient_error(an, fd) < 1e-4);
}

TEST_CASE("objective evaluation is bit-deterministic") {
  const Task task = *find_builtin_task("mbb_beam_60x20");
  oracles::TestRng rng(41);
  DensityField x(task.nelx, task.nely, Stage::kConstrained);
  for (auto& v : x.v) v = rng.uniform(0.1, 0.9);
  const ObjectiveResult a = objective_and_gradient(x, task, task.simp);
  const ObjectiveResult b = objective_and_gradient(x, task, task.simp);
  CHECK(a.compliance == b.compliance);
  for (int e = 0; e < x.count(); ++e) {
    CHECK(a.grad_x.v[e] == b.grad_x.v[e]);
    CHECK(a.xphys.v[e] == b.xphys.v[e]);
  }
}

}  // TEST_SUITE
