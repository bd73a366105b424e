#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gramis/engine.hpp"
#include "gramis/estimators.hpp"
#include "gramis/targets.hpp"

namespace gramis {

enum class TargetFamily { GaussianMixture, GGMixture, Banana };

/// Serializable description of a target. Mixture fields are ignored for Banana and vice versa.
struct TargetSpec {
  TargetFamily family = TargetFamily::GaussianMixture;
  std::vector<double> weights;
  std::vector<Vec> means;
  /// Covariances for Gaussian mixtures, scale matrices for GG mixtures.
  std::vector<Mat> matrices;
  std::vector<double> shapes;
  double smoothing = GGMixtureTarget::kDefaultSmoothing;
  long dim = 2;
  double b = 3.0;
  double c = 1.0;

  long dimension() const;
};

std::unique_ptr<TargetDensity> make_target(const TargetSpec& spec);

/// Short target names used by the CLI: toy, gm5, gg:<eta>[:<delta>], banana:<d>[:<b>:<c>].
TargetSpec parse_target_name(const std::string& text);

TargetSpec toy_target_spec();
TargetSpec gm5_target_spec();
TargetSpec gg5_target_spec(double eta, double smoothing = GGMixtureTarget::kDefaultSmoothing);
TargetSpec banana_target_spec(long dim, double b = 3.0, double c = 1.0);

struct Metrics {
  bool z = true;
  bool mean = true;
  bool second_moment = true;
  bool chi2 = false;
};

/// Upper bounds checked by `--verify`; unset bounds are not checked.
struct VerifyThresholds {
  std::optional<double> z;
  std::optional<double> mean;
  std::optional<double> second_moment;
  std::optional<double> mse_mean;
  std::optional<double> chi2;

  bool any() const { return z || mean || second_moment || mse_mean || chi2; }
};

enum class SweepAxis { Dimension, Iterations };

struct SweepSpec {
  SweepAxis axis = SweepAxis::Dimension;
  std::vector<int> values;
};

/// Log-density grid exported with traces of 2-D targets.
struct GridSpec {
  Vec low;
  Vec high;
  int points = 200;
};

struct ExperimentConfig {
  std::string name = "experiment";
  TargetSpec target;
  GramisConfig gramis;
  int runs = 100;
  std::uint64_t base_seed = 0;
  WindowPolicy window = WindowPolicy::LastHalf;
  MomentEstimator moments = MomentEstimator::Snis;
  Metrics metrics;
  int chi2_samples = 100000;
  VerifyThresholds verify;
  std::optional<SweepSpec> sweep;
  std::optional<GridSpec> grid;

  void validate() const;
};

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

std::string config_to_json(const ExperimentConfig& cfg);
/// Throws ConfigError on malformed input.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

struct BuiltinInfo {
  std::string name;
  std::string description;
};

std::vector<BuiltinInfo> list_builtins();
/// Every builtin expands to one or more experiment configs. Throws ConfigError for unknown names.
std::vector<ExperimentConfig> builtin_configs(const std::string& name);

struct RunOptions {
  /// 0 means std::thread::hardware_concurrency().
  int threads = 0;
  bool quick = false;
  bool trace = false;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
};

inline constexpr int kQuickRuns = 20;

struct RunOutcome {
  EstimateReport report;
  std::vector<Vec> final_means;
  double seconds = 0.0;
  std::string error;
};

struct ExperimentResult {
  /// As configured; runs.size() is smaller in quick mode.
  ExperimentConfig config;
  bool quick = false;
  std::vector<RunOutcome> runs;
  RmseTable table;
  double seconds = 0.0;
};

/// R independent runs (run r uses RngStream(base_seed, r)), aggregated into an RMSE table.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Threshold multiplier applied in quick mode: sqrt(configured runs / quick runs), at least 1.
double quick_tolerance_factor(const ExperimentConfig& cfg);

/// Empty when every configured threshold holds. Quick results are checked against widened thresholds.
std::vector<std::string> verify_failures(const ExperimentResult& result);

struct SweepPoint {
  int value = 0;
  ExperimentResult result;
};

/// Copy of `cfg` with the axis set to `value`; Dimension is only defined for banana targets.
ExperimentConfig apply_axis(const ExperimentConfig& cfg, SweepAxis axis, int value);

std::vector<SweepPoint> sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<int>& values,
                              const RunOptions& opts = {});

void write_summary(const ExperimentResult& result, const std::filesystem::path& path);
void write_sweep_table(const std::vector<SweepPoint>& points, SweepAxis axis, const std::filesystem::path& path);
void write_grid(const TargetDensity& target, const GridSpec& grid, const std::filesystem::path& path);
GridSpec default_grid(const TargetSpec& spec);

struct GradientCheckReport {
  std::string target;
  int points = 0;
  double max_grad_error = 0.0;
  double max_hessian_error = 0.0;
  double grad_tolerance = 1e-5;
  double hessian_tolerance = 1e-4;
  double seconds = 0.0;

  bool passed() const { return max_grad_error < grad_tolerance && max_hessian_error < hessian_tolerance; }
};

/// Central differences (step 1e-5·(1+|xᵢ|)) against the analytic gradient and Hessian.
/// Error is ‖analytic - fd‖ / max(1, ‖fd‖). GG targets with some η < 1 skip points within 1e-3 of a mean.
GradientCheckReport check_gradients(const TargetSpec& spec, int points, std::uint64_t seed);

std::string format_double(double v);

}  // namespace gramis
