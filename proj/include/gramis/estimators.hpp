#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gramis/engine.hpp"
#include "gramis/numerics.hpp"
#include "gramis/targets.hpp"

namespace gramis {

struct SampleTag {
  int t;
  int n;
  int k;
};

/// Flattened weighted samples of a run (or a window of it), one column per sample.
struct WeightedSampleSet {
  Mat points;
  std::vector<double> log_weights;
  std::vector<SampleTag> tags;
  int first_iteration = 0;
  int last_iteration = 0;

  long size() const { return points.cols(); }
  long dim() const { return points.rows(); }
};

WeightedSampleSet collect_samples(std::span<const IterationRecord> records);

enum class WindowPolicy { All, LastHalf };

/// LastHalf keeps iterations t > ⌊T/2⌋. Throws EmptyWindow.
WeightedSampleSet window_select(const WeightedSampleSet& set, WindowPolicy policy);

/// h: R^d → R^m.
class TestFunction {
 public:
  using Fn = std::function<Vec(const Vec&)>;

  static TestFunction identity();
  /// x ↦ (x₁², …, x_d²).
  static TestFunction square();
  static TestFunction custom(Fn fn);

  Vec operator()(const Vec& x) const { return fn_(x); }

 private:
  explicit TestFunction(Fn fn) : fn_(std::move(fn)) {}
  Fn fn_;
};

/// (1/(M Z)) Σ w h(x). Throws DegenerateWeights when all weights are zero.
Vec uis_estimate(const WeightedSampleSet& set, const TestFunction& h, double z);
/// Σ w̄ h(x) with w̄ = w / Σ w. Throws DegenerateWeights.
Vec snis_estimate(const WeightedSampleSet& set, const TestFunction& h);
/// Normalized weights w̄ (sum to 1). Throws DegenerateWeights.
std::vector<double> normalized_weights(const WeightedSampleSet& set);
/// (1/M) Σ w; 0 when every weight is zero.
double z_estimate(const WeightedSampleSet& set);
bool weights_degenerate(const WeightedSampleSet& set);

struct Chi2Estimate {
  double value;
  double standard_error;
};

/// Values above this are reported as +∞.
inline constexpr double kChi2Overflow = 1e12;

/// (1/M) Σ (π̃(x)/ψ(x))² - 1 over x ~ ψ, floored at 0. Throws RequiresKnownZ.
Chi2Estimate chi2_estimate(const TargetDensity& target, const ProposalBank& bank, int num_samples, RngStream& rng);

struct EstimateReport {
  double z_hat = 0.0;
  Vec snis_mean;
  Vec snis_second_moment;
  std::optional<Vec> uis_mean;
  std::optional<Vec> uis_second_moment;
  std::optional<double> chi2;
  int window_first = 0;
  int window_last = 0;
  bool failed = false;
};

/// Estimates over the selected window; uis_* are filled when Z is known.
EstimateReport make_report(const WeightedSampleSet& window, std::optional<double> known_z);
EstimateReport failed_report(long dim);

struct RmseTable {
  std::optional<double> z;
  std::optional<double> mean;
  std::optional<double> second_moment;
  /// Mean over runs of the squared Euclidean error of the mean estimate.
  std::optional<double> mse_mean;
  std::optional<double> chi2_mean;
  int runs_used = 0;
  int runs_failed = 0;
};

enum class MomentEstimator { Snis, Uis };

/// sqrt(mean over runs of ‖estimate - truth‖²), per quantity; failed runs are skipped and counted.
/// Uis requires every used report to carry uis_* estimates.
RmseTable rmse_aggregate(std::span<const EstimateReport> reports, const GroundTruth& truth,
                         MomentEstimator moments = MomentEstimator::Snis);

}  // namespace gramis
