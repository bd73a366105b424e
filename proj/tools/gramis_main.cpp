#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "gramis/harness.hpp"

using namespace gramis;

namespace {

constexpr int kExitError = 1;
constexpr int kExitVerify = 2;

struct CommonArgs {
  std::string config;
  std::string builtin;
  bool quick = false;
  bool trace = false;
  bool verify = false;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  auto* cfg = cmd->add_option("--config", a.config, "experiment config (JSON)");
  auto* bi = cmd->add_option("--builtin", a.builtin, "builtin experiment name (see list-builtins)");
  cfg->excludes(bi);
  cmd->add_flag("--quick", a.quick, "run at most 20 replications");
  cmd->add_flag("--trace", a.trace, "write per-run samples, proposal traces and the target grid");
  cmd->add_flag("--verify", a.verify, "exit with status 2 when a configured threshold is exceeded");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--seed", a.seed, "override base_seed");
  cmd->add_option("--threads", a.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
}

std::vector<ExperimentConfig> resolve(const CommonArgs& a) {
  if (!a.config.empty()) return {load_config(a.config)};
  if (!a.builtin.empty()) return builtin_configs(a.builtin);
  throw ConfigError("one of --config or --builtin is required");
}

RunOptions options_for(const CommonArgs& a, const std::string& name, bool nested) {
  RunOptions o;
  o.threads = a.threads;
  o.quick = a.quick;
  o.trace = a.trace;
  o.seed = a.seed;
  if (!a.out.empty()) o.out = nested ? std::filesystem::path(a.out) / name : std::filesystem::path(a.out);
  return o;
}

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : "-"; }

void print_result(const ExperimentResult& r) {
  const auto& t = r.table;
  std::printf("%-28s runs=%zu used=%d failed=%d  rmse_z=%s rmse_mean=%s rmse_m2=%s mse_mean=%s chi2=%s  (%.1fs)\n",
              r.config.name.c_str(), r.runs.size(), t.runs_used, t.runs_failed, cell(t.z).c_str(),
              cell(t.mean).c_str(), cell(t.second_moment).c_str(), cell(t.mse_mean).c_str(),
              cell(t.chi2_mean).c_str(), r.seconds);
}

int report_verify(const std::vector<ExperimentResult>& results) {
  int failures = 0;
  for (const auto& r : results) {
    for (const auto& msg : verify_failures(r)) {
      std::fprintf(stderr, "verify: %s\n", msg.c_str());
      ++failures;
    }
  }
  return failures == 0 ? 0 : kExitVerify;
}

std::vector<int> parse_values(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("bad sweep value '" + item + "'");
    }
  }
  return out;
}

int cmd_run(const CommonArgs& a) {
  const auto configs = resolve(a);
  const bool nested = configs.size() > 1 || !a.builtin.empty();
  std::vector<ExperimentResult> results;
  for (const auto& cfg : configs) {
    const RunOptions opts = options_for(a, cfg.name, nested);
    if (cfg.sweep) {
      for (auto& p : sweep(cfg, cfg.sweep->axis, cfg.sweep->values, opts)) {
        print_result(p.result);
        results.push_back(std::move(p.result));
      }
      continue;
    }
    results.push_back(run_experiment(cfg, opts));
    print_result(results.back());
  }
  return a.verify ? report_verify(results) : 0;
}

int cmd_sweep(const CommonArgs& a, const std::string& axis_text, const std::string& values_text) {
  SweepAxis axis;
  if (axis_text == "dimension") {
    axis = SweepAxis::Dimension;
  } else if (axis_text == "iterations") {
    axis = SweepAxis::Iterations;
  } else {
    throw ConfigError("--axis must be dimension or iterations");
  }
  const auto configs = resolve(a);
  std::vector<ExperimentResult> results;
  for (const auto& cfg : configs) {
    const std::vector<int> values =
        values_text.empty() ? (cfg.sweep ? cfg.sweep->values : std::vector<int>{}) : parse_values(values_text);
    const RunOptions opts = options_for(a, cfg.name, configs.size() > 1 || !a.builtin.empty());
    for (auto& p : sweep(cfg, axis, values, opts)) {
      print_result(p.result);
      results.push_back(std::move(p.result));
    }
  }
  return a.verify ? report_verify(results) : 0;
}

int cmd_check_gradients(const std::string& target, int points, std::uint64_t seed) {
  const GradientCheckReport r = check_gradients(parse_target_name(target), points, seed);
  std::printf("%s: %d points  max grad rel err %.3e (< %.0e)  max hessian rel err %.3e (< %.0e)  %.2fs  %s\n",
              target.c_str(), r.points, r.max_grad_error, r.grad_tolerance, r.max_hessian_error,
              r.hessian_tolerance, r.seconds, r.passed() ? "PASS" : "FAIL");
  return r.passed() ? 0 : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GRAMIS adaptive importance sampler"};
  app.require_subcommand(1);

  CommonArgs run_args;
  auto* run = app.add_subcommand("run", "run an experiment config or builtin");
  add_common(run, run_args);

  CommonArgs sweep_args;
  std::string axis = "dimension";
  std::string values;
  auto* sw = app.add_subcommand("sweep", "repeat an experiment along the dimension or iterations axis");
  add_common(sw, sweep_args);
  sw->add_option("--axis", axis, "dimension or iterations");
  sw->add_option("--values", values, "comma separated axis values");

  std::string target;
  int points = 100;
  std::uint64_t grad_seed = 0;
  auto* grad = app.add_subcommand("check-gradients", "compare analytic derivatives with finite differences");
  grad->add_option("--target", target, "toy, gm5, gg:<eta>[:<delta>] or banana:<d>[:<b>:<c>]")->required();
  grad->add_option("--points", points, "number of random points")->check(CLI::PositiveNumber);
  grad->add_option("--seed", grad_seed, "random seed");

  auto* list = app.add_subcommand("list-builtins", "list builtin experiments");

  std::string print_name;
  auto* print = app.add_subcommand("print-config", "print the JSON config(s) of a builtin");
  print->add_option("name", print_name, "builtin name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (sw->parsed()) return cmd_sweep(sweep_args, axis, values);
    if (grad->parsed()) return cmd_check_gradients(target, points, grad_seed);
    if (list->parsed()) {
      for (const auto& b : list_builtins()) std::printf("%-20s %s\n", b.name.c_str(), b.description.c_str());
      return 0;
    }
    if (print->parsed()) {
      for (const auto& cfg : builtin_configs(print_name)) std::cout << config_to_json(cfg) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return 0;
}
