#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "topopt/cnn.hpp"
#include "topopt/projection.hpp"
#include "topopt/runner.hpp"
#include "topopt/simp.hpp"
#include "topopt/task.hpp"

using namespace topopt;

namespace {

Task tiny_cantilever() {
  Task task;
  task.name = "tiny_cantilever";
  task.nelx = 12;
  task.nely = 8;
  task.volume_fraction = 0.4;
  task.fixed = {{NodeSelector::parse("edge: left"), true, true}};
  task.loads = {{NodeSelector::parse("point: 12, 4"), 0.0, -1.0}};
  return task;
}

RunOptions quick_options() {
  RunOptions opts;
  opts.lbfgs_iterations = 15;
  opts.oc_iterations = 15;
  opts.latent_dim = 8;
  return opts;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("pixel-lbfgs runs are deterministic and feasible at every row") {
  const Task task = tiny_cantilever();
  const RunOptions opts = quick_options();
  const RunResult a = run(task, Method::kPixelLbfgs, 0, opts);
  const RunResult b = run(task, Method::kPixelLbfgs, 0, opts);

  REQUIRE(a.trace.rows.size() == b.trace.rows.size());
  for (std::size_t i = 0; i < a.trace.rows.size(); ++i) {
    CHECK(a.trace.rows[i].compliance == b.trace.rows[i].compliance);
    CHECK(std::abs(a.trace.rows[i].volume - task.volume_fraction) <= 1e-6);
  }
  for (int e = 0; e < a.design.count(); ++e) CHECK(a.design.v[e] == b.design.v[e]);

  // The reported best is the row minimum.
  double row_min = a.trace.rows[0].compliance;
  for (const auto& r : a.trace.rows) row_min = std::min(row_min, r.compliance);
  CHECK(a.best_compliance == row_min);
  CHECK(a.trace.rows[a.trace.best_row()].compliance == row_min);
}

TEST_CASE("cnn-lbfgs decreases compliance on the tiny task and pins the volume") {
  const Task task = tiny_cantilever();
  RunOptions opts = quick_options();
  const RunResult res = run(task, Method::kCnnLbfgs, 0, opts);
  REQUIRE(res.trace.rows.size() > 2);
  CHECK(res.best_compliance < res.trace.rows.front().compliance);
  CHECK(std::abs(res.design_constrained.mean() - task.volume_fraction) <= 1e-6);
  for (int e = 0; e < res.design_constrained.count(); ++e) {
    CHECK(res.design_constrained.v[e] >= 0.0);
    CHECK(res.design_constrained.v[e] <= 1.0);
  }
  CHECK(res.cnn_params.has_value());
}

TEST_CASE("oc ignores the seed in constant-initialization mode") {
  const Task task = tiny_cantilever();
  const RunOptions opts = quick_options();
  const RunResult a = run(task, Method::kOc, 0, opts);
  const RunResult b = run(task, Method::kOc, 99, opts);
  REQUIRE(a.trace.rows.size() == b.trace.rows.size());
  for (std::size_t i = 0; i < a.trace.rows.size(); ++i) {
    CHECK(a.trace.rows[i].compliance == b.trace.rows[i].compliance);
  }
}

TEST_CASE("cnn-seeded pixel runs start exactly at the projected untrained CNN output") {
  const Task task = tiny_cantilever();
  RunOptions opts = quick_options();
  opts.cnn_seeded_init = true;
  const RunResult res = run(task, Method::kPixelLbfgs, 0, opts);

  const auto arch = CnnArchitecture::for_grid(task.nelx, task.nely, opts.latent_dim);
  auto [logits, tape] = cnn_forward(init_params(arch, 0), arch);
  const ProjectionResult pr = project(logits, task.volume_fraction);
  ComplianceProblem problem(task, task.simp);
  const double c0 = problem.evaluate(pr.x).compliance;
  CHECK(res.trace.rows.front().compliance == c0);
}

TEST_CASE("ensembles aggregate medians, bests, and handle the singleton case") {
  const Task task = tiny_cantilever();
  RunOptions opts = quick_options();
  opts.lbfgs_iterations = 8;
  opts.oc_iterations = 8;

  const EnsembleResult single = ensemble(task, Method::kPixelLbfgs, {0}, opts);
  CHECK(single.median_compliance == single.best_compliance);
  CHECK(single.runs.size() == 1);

  const EnsembleResult five = ensemble(task, Method::kPixelLbfgs, {0, 1, 2, 3, 4}, opts);
  CHECK(five.runs.size() == 5);
  CHECK(five.best_compliance <= five.median_compliance);
  CHECK(five.warnings.empty());

  // Seeded OC members differ (cnn-seeded initializations).
  const EnsembleResult oc5 = ensemble(task, Method::kOc, {0, 1}, opts);
  REQUIRE(oc5.runs.size() == 2);
  CHECK(oc5.runs[0].trace.rows.front().compliance !=
        oc5.runs[1].trace.rows.front().compliance);
}

TEST_CASE("summarize computes scores, near-best counts, and a proper CDF") {
  std::vector<TaskMethodStats> stats = {
      {"t1", "a", 100.0, 100.0},
      {"t1", "b", 100.4, 101.0},
      {"t1", "c", 110.0, 111.0},
  };
  const BenchmarkSummary s = summarize(stats);
  REQUIRE(s.tasks.size() == 1);
  CHECK(s.tasks[0].best_overall == 100.0);
  CHECK(s.tasks[0].methods[0].score == doctest::Approx(0.0));
  CHECK(s.tasks[0].methods[1].score == doctest::Approx(0.004));
  CHECK(s.tasks[0].methods[2].score == doctest::Approx(0.10));
  CHECK(s.near_best_counts[0] == 1);
  CHECK(s.near_best_counts[1] == 1);
  CHECK(s.near_best_counts[2] == 0);
  // CDF at +inf is 1 for every method.
  for (const auto& row : s.cdf) CHECK(row.back() == 1.0);
  // Exactly one method per task scores 0.
  int zero_count = 0;
  for (const auto& m : s.tasks[0].methods) {
    if (m.score == 0.0) ++zero_count;
  }
  CHECK(zero_count == 1);

  const BenchmarkSummary lone = summarize({{"t", "only", 42.0, 42.0}});
  CHECK(lone.tasks[0].methods[0].score == 0.0);
  CHECK(lone.near_best_counts[0] == 1);
  CHECK(render_summary(lone).find("only") != std::string::npos);
}

TEST_CASE("a uniform half-density design quantizes to PGM value 128") {
  DensityField x(4, 4, Stage::kPhysical, 0.5);
  const std::filesystem::path path = "pgm_test.pgm";
  write_pgm(path, x);
  const std::string bytes = slurp(path);
  std::filesystem::remove(path);
  const std::string header = "P5\n4 4\n255\n";
  REQUIRE(bytes.size() == header.size() + 16);
  CHECK(bytes.compare(0, header.size(), header) == 0);
  for (std::size_t i = header.size(); i < bytes.size(); ++i) {
    CHECK(static_cast<unsigned char>(bytes[i]) == 128);  // round(127.5) away from zero
  }
}

TEST_CASE("trace CSVs round-trip through the documented parser") {
  OptimizationTrace trace{"t", "oc", 0, {}};
  trace.rows = {{0, 123.456, 0.4, 1.25, 0.001}, {1, 99.5, 0.4, 0.75, 0.123}};
  const std::filesystem::path path = "trace_test.csv";
  write_trace_csv(path, trace);
  const OptimizationTrace back = parse_trace_csv(slurp(path));
  std::filesystem::remove(path);
  REQUIRE(back.rows.size() == trace.rows.size());
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    CHECK(back.rows[i].iteration == trace.rows[i].iteration);
    CHECK(back.rows[i].compliance == trace.rows[i].compliance);
    CHECK(back.rows[i].volume == trace.rows[i].volume);
    CHECK(back.rows[i].grad_norm == trace.rows[i].grad_norm);
  }
}

TEST_CASE("the config hash reacts to every SimpConfig field") {
  const SimpConfig base;
  const std::uint64_t h0 = config_hash(base);
  SimpConfig c = base;
  c.penal = 3.5;
  CHECK(config_hash(c) != h0);
  c = base;
  c.E0 = 2.0;
  CHECK(config_hash(c) != h0);
  c = base;
  c.Emin = 1e-8;
  CHECK(config_hash(c) != h0);
  c = base;
  c.nu = 0.25;
  CHECK(config_hash(c) != h0);
  c = base;
  c.filter_radius = 3.0;
  CHECK(config_hash(c) != h0);
  CHECK(config_hash(base) == h0);
}

TEST_CASE("emit_artifacts writes the full artifact set") {
  const Task task = tiny_cantilever();
  RunOptions opts = quick_options();
  opts.lbfgs_iterations = 4;
  const RunResult res = run(task, Method::kCnnLbfgs, 1, opts);
  const std::filesystem::path dir = "artifact_test_dir";
  emit_artifacts(res, task, dir);
  CHECK(std::filesystem::exists(dir / "tiny_cantilever_cnn-lbfgs_s1.pgm"));
  CHECK(std::filesystem::exists(dir / "tiny_cantilever_cnn-lbfgs_s1.csv"));
  CHECK(std::filesystem::exists(dir / "tiny_cantilever_cnn-lbfgs_s1_meta.txt"));
  CHECK(std::filesystem::exists(dir / "tiny_cantilever_cnn-lbfgs_s1_params.bin"));
  const std::string meta = slurp(dir / "tiny_cantilever_cnn-lbfgs_s1_meta.txt");
  CHECK(meta.find("config_hash:") != std::string::npos);
  CHECK(meta.find("task: tiny_cantilever") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("both parameterizations drive the identical optimizer entry point") {
  // The pixel and CNN paths differ only in the objective closure; both run
  // the shared lbfgs_minimize and report through the same trace machinery.
  const Task task = tiny_cantilever();
  RunOptions opts = quick_options();
  opts.lbfgs_iterations = 5;
  const RunResult pixel = run(task, Method::kPixelLbfgs, 0, opts);
  const RunResult cnn = run(task, Method::kCnnLbfgs, 0, opts);
  CHECK(pixel.trace.method == "pixel-lbfgs");
  CHECK(cnn.trace.method == "cnn-lbfgs");
  for (const auto& r : pixel.trace.rows) CHECK(std::abs(r.volume - 0.4) <= 1e-6);
  for (const auto& r : cnn.trace.rows) CHECK(std::abs(r.volume - 0.4) <= 1e-6);
}

}  // TEST_SUITE
