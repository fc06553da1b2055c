#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "topopt/cnn.hpp"
#include "topopt/config.hpp"
#include "topopt/field.hpp"
#include "topopt/task.hpp"

namespace topopt {

enum class Method { kCnnLbfgs, kPixelLbfgs, kOc };

std::string method_name(Method method);
std::optional<Method> parse_method(const std::string& name);

struct RunOptions {
  int lbfgs_iterations = 200;
  int oc_iterations = 100;
  int latent_dim = 128;
  // Best-of-ensemble mode: pixel-space methods start from the untrained CNN
  // output for the given seed (pixel-lbfgs takes the raw logits, oc their
  // projection). Off by default: oc and pixel-lbfgs then use constant
  // initialization and ignore the seed.
  bool cnn_seeded_init = false;
};

struct TraceRow {
  int iteration = 0;
  double compliance = 0.0;
  double volume = 0.0;      // mean of the constrained densities
  double grad_norm = 0.0;   // 2-norm of the gradient w.r.t. the optimization variables
  double elapsed_s = 0.0;
};

struct OptimizationTrace {
  std::string task_name;
  std::string method;
  std::uint64_t seed = 0;
  std::vector<TraceRow> rows;

  int best_row() const;  // index of the minimum-compliance row
};

struct RunResult {
  DensityField design;              // physical densities of the best iterate
  DensityField design_constrained;  // matching constrained densities
  double best_compliance = 0.0;
  OptimizationTrace trace;
  std::optional<CnnParams> cnn_params;  // parameters at the best iterate (cnn-lbfgs)
  CnnArchitecture arch;                 // populated for cnn-lbfgs runs
};

// Runs one optimization. Deterministic for fixed (task, method, seed, options)
// up to the elapsed-time column. The returned design is the feasible iterate
// with minimum compliance, not the final one.
RunResult run(const Task& task, Method method, std::uint64_t seed,
              const RunOptions& options = {});

struct EnsembleResult {
  double median_compliance = 0.0;  // over the per-seed best compliances
  double best_compliance = 0.0;
  std::vector<RunResult> runs;               // surviving members, input order
  std::vector<std::string> warnings;         // one entry per failed member
};

// Runs the seed ensemble (in parallel when hardware allows) with
// cnn_seeded_init engaged so all methods share the untrained-CNN
// initializations. Failed members are excluded with a warning; throws only if
// every member fails.
EnsembleResult ensemble(const Task& task, Method method,
                        const std::vector<std::uint64_t>& seeds,
                        const RunOptions& options = {});

struct TaskMethodStats {
  std::string task;
  std::string method;
  double best = 0.0;
  double median = 0.0;
};

struct MethodScore {
  std::string method;
  double best = 0.0;
  double median = 0.0;
  double score = 0.0;  // best / best_overall - 1, >= 0, 0 for the winning method
};

struct TaskScores {
  std::string task;
  double best_overall = 0.0;
  std::vector<MethodScore> methods;
};

struct BenchmarkSummary {
  std::vector<TaskScores> tasks;
  std::vector<std::string> methods;
  std::vector<double> thresholds;               // includes 0.005; last is +inf
  std::vector<std::vector<double>> cdf;         // [method][threshold] fraction of tasks
  std::vector<int> near_best_counts;            // score <= 0.005, per method
};

std::vector<double> default_score_thresholds();

BenchmarkSummary summarize(const std::vector<TaskMethodStats>& stats,
                           std::vector<double> thresholds = default_score_thresholds());

std::string render_summary(const BenchmarkSummary& summary);

// --- artifact emission ---------------------------------------------------

// 8-bit grayscale PGM (P5), one pixel per element, row-major from the top
// row; 0 = solid (x=1), 255 = void (x=0), quantized as round(255*(1-x)) with
// halves away from zero.
void write_pgm(const std::filesystem::path& path, const DensityField& xphys);

void write_trace_csv(const std::filesystem::path& path, const OptimizationTrace& trace);
OptimizationTrace parse_trace_csv(const std::string& content);

// FNV-1a over the canonical rendering of every SimpConfig field.
std::uint64_t config_hash(const SimpConfig& cfg);

// Writes <task>_<method>_s<seed>.pgm / .csv / _meta.txt (and _params.bin for
// cnn-lbfgs) into dir. I/O failures carry the offending path.
void emit_artifacts(const RunResult& result, const Task& task,
                    const std::filesystem::path& dir);

}  // namespace topopt
