// Command-line driver: run a single optimization, benchmark task/method
// grids, or list the built-in tasks.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "topopt/errors.hpp"
#include "topopt/runner.hpp"
#include "topopt/task.hpp"

namespace {

using namespace topopt;

Task load_task(const std::string& ref) {
  if (auto builtin = find_builtin_task(ref)) return *builtin;
  std::ifstream in(ref);
  if (!in) {
    throw TaskError("task '" + ref + "': not a built-in name and no such file");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_task(buffer.str());
}

bool glob_match(const std::string& pattern, const std::string& name) {
  std::string re;
  for (char c : pattern) {
    if (c == '*') re += ".*";
    else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') re += c;
    else { re += '\\'; re += c; }
  }
  return std::regex_match(name, std::regex(re));
}

std::vector<Task> select_tasks(const std::string& spec) {
  std::vector<Task> out;
  if (spec == "all") {
    out = builtin_tasks();
    return out;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item.find('*') != std::string::npos) {
      bool any = false;
      for (const Task& t : builtin_tasks()) {
        if (glob_match(item, t.name)) {
          out.push_back(t);
          any = true;
        }
      }
      if (!any) throw TaskError("task pattern '" + item + "' matches no built-in task");
    } else {
      out.push_back(load_task(item));
    }
  }
  if (out.empty()) throw TaskError("no tasks selected");
  return out;
}

RunOptions make_options(int iters, int latent) {
  RunOptions opts;
  if (iters > 0) {
    opts.lbfgs_iterations = iters;
    opts.oc_iterations = iters;
  }
  opts.latent_dim = latent;
  return opts;
}

int cmd_run(const std::string& task_ref, const std::string& method_name_, std::uint64_t seed,
            int iters, int latent, const std::string& out_dir) {
  const auto method = parse_method(method_name_);
  if (!method) throw TaskError("unknown method '" + method_name_ + "'");
  const Task task = load_task(task_ref);
  const RunOptions opts = make_options(iters, latent);
  const RunResult result = run(task, *method, seed, opts);
  emit_artifacts(result, task, out_dir);
  std::printf("%s %s seed=%llu best_compliance=%.10g (iteration %d of %zu)\n",
              task.name.c_str(), result.trace.method.c_str(),
              static_cast<unsigned long long>(seed), result.best_compliance,
              result.trace.rows[result.trace.best_row()].iteration,
              result.trace.rows.size() - 1);
  return 0;
}

int cmd_bench(const std::string& tasks_spec, const std::string& methods_spec, int nseeds,
              int iters, int latent, const std::string& out_dir) {
  const std::vector<Task> tasks = select_tasks(tasks_spec);
  std::vector<Method> methods;
  std::stringstream ss(methods_spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto m = parse_method(item);
    if (!m) throw TaskError("unknown method '" + item + "'");
    methods.push_back(*m);
  }
  if (methods.empty()) throw TaskError("no methods selected");
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < nseeds; ++s) seeds.push_back(s);

  const RunOptions opts = make_options(iters, latent);
  std::vector<TaskMethodStats> stats;
  for (const Task& task : tasks) {
    for (Method method : methods) {
      std::printf("bench: %s / %s (%d seeds)...\n", task.name.c_str(),
                  method_name(method).c_str(), nseeds);
      std::fflush(stdout);
      const EnsembleResult ens = ensemble(task, method, seeds, opts);
      for (const auto& w : ens.warnings) {
        std::fprintf(stderr, "warning: %s/%s: %s\n", task.name.c_str(),
                     method_name(method).c_str(), w.c_str());
      }
      for (const auto& r : ens.runs) emit_artifacts(r, task, out_dir);
      stats.push_back({task.name, method_name(method), ens.best_compliance,
                       ens.median_compliance});
    }
  }
  const BenchmarkSummary summary = summarize(stats);
  const std::string text = render_summary(summary);
  std::filesystem::create_directories(out_dir);
  std::ofstream out(std::filesystem::path(out_dir) / "summary.txt");
  out << text;
  std::cout << text;
  return 0;
}

int cmd_list_tasks() {
  std::printf("%-30s %9s %6s %6s  %s\n", "name", "elements", "nelx", "nely", "V0");
  for (const Task& t : builtin_tasks()) {
    std::printf("%-30s %9d %6d %6d  %.2f\n", t.name.c_str(), t.num_elements(), t.nelx,
                t.nely, t.volume_fraction);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-compliance topology optimization on 2D grids with "
               "pixel and CNN parameterizations"};
  app.require_subcommand(1);

  std::string task_ref, method = "oc", out_dir = "out";
  std::string tasks_spec = "all", methods_spec = "cnn-lbfgs,pixel-lbfgs,oc";
  std::uint64_t seed = 0;
  int iters = 0;  // 0 = per-method default (200 L-BFGS, 100 OC)
  int nseeds = 5;
  int latent = 128;

  auto* run_cmd = app.add_subcommand("run", "Optimize one task with one method");
  run_cmd->add_option("--task", task_ref, "Built-in task name or task file path")->required();
  run_cmd->add_option("--method", method, "cnn-lbfgs | pixel-lbfgs | oc")->required();
  run_cmd->add_option("--seed", seed, "Random seed (ignored by oc)");
  run_cmd->add_option("--iters", iters, "Iteration budget (default 200 L-BFGS, 100 OC)");
  run_cmd->add_option("--latent", latent, "CNN latent dimension");
  run_cmd->add_option("--out", out_dir, "Output directory");

  auto* bench_cmd = app.add_subcommand("bench", "Benchmark tasks x methods x seeds");
  bench_cmd->add_option("--tasks", tasks_spec, "'all', or comma list of names/globs/files");
  bench_cmd->add_option("--methods", methods_spec, "Comma list of methods");
  bench_cmd->add_option("--seeds", nseeds, "Number of seeds (0..N-1)");
  bench_cmd->add_option("--iters", iters, "Iteration budget per run");
  bench_cmd->add_option("--latent", latent, "CNN latent dimension");
  bench_cmd->add_option("--out", out_dir, "Output directory");

  auto* list_cmd = app.add_subcommand("list-tasks", "List built-in tasks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(task_ref, method, seed, iters, latent, out_dir);
    if (bench_cmd->parsed()) return cmd_bench(tasks_spec, methods_spec, nseeds, iters, latent, out_dir);
    if (list_cmd->parsed()) return cmd_list_tasks();
  } catch (const topopt::TaskError& e) {
    std::fprintf(stderr, "task error: %s\n", e.what());
    return 2;
  } catch (const topopt::SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
