#include "topopt/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "topopt/errors.hpp"
#include "topopt/lbfgs.hpp"
#include "topopt/oc.hpp"
#include "topopt/projection.hpp"
#include "topopt/simp.hpp"

namespace topopt {

namespace {

Eigen::VectorXd to_vector(const DensityField& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.v.data(), f.v.size());
}

DensityField to_field(const Eigen::VectorXd& v, int nelx, int nely, Stage stage) {
  DensityField f(nelx, nely, stage);
  Eigen::Map<Eigen::VectorXd>(f.v.data(), f.v.size()) = v;
  return f;
}

double field_norm(const DensityField& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.v.data(), f.v.size()).norm();
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

struct EvalStash {
  double compliance = 0.0;
  double volume = 0.0;
  DensityField x;
  DensityField xphys;
};

}  // namespace

std::string method_name(Method method) {
  switch (method) {
    case Method::kCnnLbfgs: return "cnn-lbfgs";
    case Method::kPixelLbfgs: return "pixel-lbfgs";
    case Method::kOc: return "oc";
  }
  return "?";
}

std::optional<Method> parse_method(const std::string& name) {
  if (name == "cnn-lbfgs") return Method::kCnnLbfgs;
  if (name == "pixel-lbfgs") return Method::kPixelLbfgs;
  if (name == "oc") return Method::kOc;
  return std::nullopt;
}

int OptimizationTrace::best_row() const {
  int best = 0;
  for (int i = 1; i < static_cast<int>(rows.size()); ++i) {
    if (rows[i].compliance < rows[best].compliance) best = i;
  }
  return best;
}

namespace {

RunResult run_oc(const Task& task, ComplianceProblem& problem, std::uint64_t seed,
                 const RunOptions& opts, const Stopwatch& clock) {
  const double V0 = task.volume_fraction;
  RunResult out;
  out.trace = {task.name, method_name(Method::kOc), seed, {}};

  DensityField x(task.nelx, task.nely, Stage::kConstrained, V0);
  if (opts.cnn_seeded_init) {
    const auto arch = CnnArchitecture::for_grid(task.nelx, task.nely, opts.latent_dim);
    auto [logits, tape] = cnn_forward(init_params(arch, seed), arch);
    x = project(logits, V0).x;
  }

  OcState state{std::move(x), OcOptions{}, 0};
  out.best_compliance = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= opts.oc_iterations; ++it) {
    ObjectiveResult res = problem.evaluate(state.x);
    out.trace.rows.push_back(
        {it, res.compliance, state.x.mean(), field_norm(res.grad_x), clock.seconds()});
    if (res.compliance < out.best_compliance) {
      out.best_compliance = res.compliance;
      out.design = res.xphys;
      out.design_constrained = state.x;
    }
    if (it == opts.oc_iterations) break;
    state = oc_step(state, res.grad_x, V0);
  }
  return out;
}

RunResult run_lbfgs(const Task& task, ComplianceProblem& problem, Method method,
                    std::uint64_t seed, const RunOptions& opts, const Stopwatch& clock) {
  const double V0 = task.volume_fraction;
  const bool is_cnn = method == Method::kCnnLbfgs;
  RunResult out;
  out.trace = {task.name, method_name(method), seed, {}};
  out.best_compliance = std::numeric_limits<double>::infinity();

  const auto arch = CnnArchitecture::for_grid(task.nelx, task.nely, opts.latent_dim);
  if (is_cnn) out.arch = arch;

  EvalStash stash;
  const auto chain_eval = [&](const DensityField& logits, DensityField* grad_logits) {
    const ProjectionResult pr = project(logits, V0);
    ObjectiveResult res = problem.evaluate(pr.x);
    *grad_logits = project_backward(pr, res.grad_x);
    stash.compliance = res.compliance;
    stash.volume = pr.x.mean();
    stash.x = pr.x;
    stash.xphys = std::move(res.xphys);
    return res.compliance;
  };

  Objective objective;
  Eigen::VectorXd init;
  if (is_cnn) {
    init = flatten(init_params(arch, seed));
    objective = [&, arch](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
      const CnnParams params = unflatten(arch, v);
      auto [logits, tape] = cnn_forward(params, arch);
      DensityField grad_logits;
      const double c = chain_eval(logits, &grad_logits);
      grad = flatten(cnn_backward(tape, grad_logits));
      return c;
    };
  } else {
    DensityField logits0(task.nelx, task.nely, Stage::kLogits, 0.0);
    if (opts.cnn_seeded_init) {
      logits0 = cnn_forward(init_params(arch, seed), arch).first;
    }
    init = to_vector(logits0);
    objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
      const DensityField logits = to_field(v, task.nelx, task.nely, Stage::kLogits);
      DensityField grad_logits;
      const double c = chain_eval(logits, &grad_logits);
      grad = to_vector(grad_logits);
      return c;
    };
  }

  const auto callback = [&](int iter, const Eigen::VectorXd& x, double f,
                            const Eigen::VectorXd& g) {
    out.trace.rows.push_back({iter, f, stash.volume, g.norm(), clock.seconds()});
    if (f < out.best_compliance) {
      out.best_compliance = f;
      out.design = stash.xphys;
      out.design_constrained = stash.x;
      if (is_cnn) out.cnn_params = unflatten(arch, x);
    }
  };

  LbfgsOptions lopt;
  lopt.max_iterations = opts.lbfgs_iterations;
  lbfgs_minimize(objective, std::move(init), lopt, callback);
  return out;
}

}  // namespace

RunResult run(const Task& task, Method method, std::uint64_t seed, const RunOptions& opts) {
  const Stopwatch clock;
  ComplianceProblem problem(task, task.simp);
  switch (method) {
    case Method::kOc:
      return run_oc(task, problem, seed, opts, clock);
    case Method::kPixelLbfgs:
    case Method::kCnnLbfgs:
      return run_lbfgs(task, problem, method, seed, opts, clock);
  }
  throw std::invalid_argument("run: unknown method");
}

EnsembleResult ensemble(const Task& task, Method method,
                        const std::vector<std::uint64_t>& seeds, const RunOptions& opts) {
  if (seeds.empty()) throw std::invalid_argument("ensemble: seed list must be nonempty");
  RunOptions member_opts = opts;
  member_opts.cnn_seeded_init = true;

  const int n = static_cast<int>(seeds.size());
  std::vector<std::optional<RunResult>> results(n);
  std::vector<std::string> errors(n);

  const int workers =
      std::max(1, std::min<int>(n, static_cast<int>(std::thread::hardware_concurrency())));
  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        results[i] = run(task, method, seeds[i], member_opts);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  EnsembleResult out;
  std::vector<double> finals;
  for (int i = 0; i < n; ++i) {
    if (results[i]) {
      finals.push_back(results[i]->best_compliance);
      out.runs.push_back(std::move(*results[i]));
    } else {
      out.warnings.push_back("seed " + std::to_string(seeds[i]) + " failed: " + errors[i]);
    }
  }
  if (finals.empty()) {
    throw std::runtime_error("ensemble: every member failed; first error: " + errors[0]);
  }
  std::sort(finals.begin(), finals.end());
  const std::size_t m = finals.size();
  out.median_compliance =
      (m % 2 == 1) ? finals[m / 2] : 0.5 * (finals[m / 2 - 1] + finals[m / 2]);
  out.best_compliance = finals.front();
  return out;
}

std::vector<double> default_score_thresholds() {
  return {0.0,  0.001, 0.002, 0.005, 0.01, 0.02,
          0.05, 0.1,   0.2,   0.5,   1.0,  std::numeric_limits<double>::infinity()};
}

BenchmarkSummary summarize(const std::vector<TaskMethodStats>& stats,
                           std::vector<double> thresholds) {
  BenchmarkSummary summary;
  summary.thresholds = std::move(thresholds);

  for (const auto& s : stats) {
    if (std::find(summary.methods.begin(), summary.methods.end(), s.method) ==
        summary.methods.end()) {
      summary.methods.push_back(s.method);
    }
    auto it = std::find_if(summary.tasks.begin(), summary.tasks.end(),
                           [&](const TaskScores& t) { return t.task == s.task; });
    if (it == summary.tasks.end()) {
      summary.tasks.push_back({s.task, 0.0, {}});
      it = summary.tasks.end() - 1;
    }
    it->methods.push_back({s.method, s.best, s.median, 0.0});
  }

  for (auto& task : summary.tasks) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : task.methods) best = std::min(best, m.best);
    task.best_overall = best;
    for (auto& m : task.methods) m.score = m.best / best - 1.0;
  }

  const std::size_t ntasks = summary.tasks.size();
  summary.cdf.assign(summary.methods.size(),
                     std::vector<double>(summary.thresholds.size(), 0.0));
  summary.near_best_counts.assign(summary.methods.size(), 0);
  for (std::size_t mi = 0; mi < summary.methods.size(); ++mi) {
    for (std::size_t ti = 0; ti < summary.thresholds.size(); ++ti) {
      int count = 0;
      for (const auto& task : summary.tasks) {
        for (const auto& m : task.methods) {
          if (m.method == summary.methods[mi] && m.score <= summary.thresholds[ti]) ++count;
        }
      }
      summary.cdf[mi][ti] = ntasks ? static_cast<double>(count) / ntasks : 0.0;
    }
    int near = 0;
    for (const auto& task : summary.tasks) {
      for (const auto& m : task.methods) {
        if (m.method == summary.methods[mi] && m.score <= 0.005) ++near;
      }
    }
    summary.near_best_counts[mi] = near;
  }
  return summary;
}

std::string render_summary(const BenchmarkSummary& summary) {
  std::ostringstream os;
  char buf[256];
  os << "benchmark summary (schema_version 1)\n\n";
  os << "per-task scores (score = compliance / best_overall - 1)\n";
  for (const auto& task : summary.tasks) {
    std::snprintf(buf, sizeof buf, "task: %s  best_overall: %.10g\n", task.task.c_str(),
                  task.best_overall);
    os << buf;
    for (const auto& m : task.methods) {
      std::snprintf(buf, sizeof buf, "  %-12s best: %-14.10g median: %-14.10g score: %.6f\n",
                    m.method.c_str(), m.best, m.median, m.score);
      os << buf;
    }
  }
  os << "\nscore distribution (fraction of tasks with score <= threshold)\n";
  os << "threshold";
  for (const auto& m : summary.methods) {
    std::snprintf(buf, sizeof buf, "  %12s", m.c_str());
    os << buf;
  }
  os << "\n";
  for (std::size_t ti = 0; ti < summary.thresholds.size(); ++ti) {
    if (std::isinf(summary.thresholds[ti])) {
      std::snprintf(buf, sizeof buf, "%-9s", "inf");
    } else {
      std::snprintf(buf, sizeof buf, "%-9.3f", summary.thresholds[ti]);
    }
    os << buf;
    for (std::size_t mi = 0; mi < summary.methods.size(); ++mi) {
      std::snprintf(buf, sizeof buf, "  %12.3f", summary.cdf[mi][ti]);
      os << buf;
    }
    os << "\n";
  }
  os << "\nbest or near-best (score <= 0.005):";
  for (std::size_t mi = 0; mi < summary.methods.size(); ++mi) {
    std::snprintf(buf, sizeof buf, " %s %d/%zu", summary.methods[mi].c_str(),
                  summary.near_best_counts[mi], summary.tasks.size());
    os << buf;
    if (mi + 1 < summary.methods.size()) os << ",";
  }
  os << "\n";
  return os.str();
}

void write_pgm(const std::filesystem::path& path, const DensityField& xphys) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P5\n" << xphys.nelx << " " << xphys.nely << "\n255\n";
  for (int ey = 0; ey < xphys.nely; ++ey) {
    for (int ex = 0; ex < xphys.nelx; ++ex) {
      const long q = std::lround(255.0 * (1.0 - xphys.at(ex, ey)));
      out.put(static_cast<char>(std::clamp<long>(q, 0, 255)));
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_trace_csv(const std::filesystem::path& path, const OptimizationTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "iteration,compliance,volume,grad_norm,elapsed_seconds\n";
  char buf[256];
  for (const auto& row : trace.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.6f\n", row.iteration,
                  row.compliance, row.volume, row.grad_norm, row.elapsed_s);
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

OptimizationTrace parse_trace_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line) || line != "iteration,compliance,volume,grad_norm,elapsed_seconds") {
    throw std::runtime_error("trace csv: unexpected header");
  }
  OptimizationTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TraceRow row;
    if (std::sscanf(line.c_str(), "%d,%lg,%lg,%lg,%lg", &row.iteration, &row.compliance,
                    &row.volume, &row.grad_norm, &row.elapsed_s) != 5) {
      throw std::runtime_error("trace csv: malformed row '" + line + "'");
    }
    trace.rows.push_back(row);
  }
  return trace;
}

std::uint64_t config_hash(const SimpConfig& cfg) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "penal=%.17g;E0=%.17g;Emin=%.17g;nu=%.17g;filter_radius=%.17g",
                cfg.penal, cfg.E0, cfg.Emin, cfg.nu, cfg.filter_radius);
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (const char* p = buf; *p; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 1099511628211ull;
  }
  return h;
}

void emit_artifacts(const RunResult& result, const Task& task,
                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string prefix =
      task.name + "_" + result.trace.method + "_s" + std::to_string(result.trace.seed);

  write_pgm(dir / (prefix + ".pgm"), result.design);
  write_trace_csv(dir / (prefix + ".csv"), result.trace);
  if (result.cnn_params) {
    save_params((dir / (prefix + "_params.bin")).string(), result.arch, *result.cnn_params);
  }

  const auto meta_path = dir / (prefix + "_meta.txt");
  std::ofstream meta(meta_path);
  if (!meta) throw std::runtime_error("cannot open " + meta_path.string() + " for writing");
  char buf[256];
  meta << "schema_version: 1\n";
  meta << "task: " << task.name << "\n";
  meta << "method: " << result.trace.method << "\n";
  meta << "seed: " << result.trace.seed << "\n";
  meta << "nelx: " << task.nelx << "\n";
  meta << "nely: " << task.nely << "\n";
  std::snprintf(buf, sizeof buf, "volume_fraction: %.17g\n", task.volume_fraction);
  meta << buf;
  std::snprintf(buf, sizeof buf,
                "penal: %.17g\nE0: %.17g\nEmin: %.17g\nnu: %.17g\nfilter_radius: %.17g\n",
                task.simp.penal, task.simp.E0, task.simp.Emin, task.simp.nu,
                task.simp.filter_radius);
  meta << buf;
  std::snprintf(buf, sizeof buf, "config_hash: %016llx\n",
                static_cast<unsigned long long>(config_hash(task.simp)));
  meta << buf;
  std::snprintf(buf, sizeof buf, "best_compliance: %.17g\n", result.best_compliance);
  meta << buf;
  meta << "best_iteration: " << result.trace.rows[result.trace.best_row()].iteration << "\n";
  std::snprintf(buf, sizeof buf, "design_volume: %.17g\n", result.design_constrained.mean());
  meta << buf;
  std::snprintf(buf, sizeof buf, "design_min: %.17g\ndesign_max: %.17g\n",
                result.design_constrained.min_value(), result.design_constrained.max_value());
  meta << buf;
  const std::time_t now = std::time(nullptr);
  char stamp[64];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  meta << "timestamp: " << stamp << "\n";
  if (!meta) throw std::runtime_error("write failed for " + meta_path.string());
}

}  // namespace topopt
