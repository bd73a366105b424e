#include "gramis/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gramis {

WeightedSampleSet collect_samples(std::span<const IterationRecord> records) {
  WeightedSampleSet set;
  if (records.empty()) return set;
  long total = 0;
  for (const auto& r : records) total += r.samples.size();
  const long d = records.front().samples.dim();
  set.points.resize(d, total);
  set.log_weights.reserve(static_cast<std::size_t>(total));
  set.tags.reserve(static_cast<std::size_t>(total));
  long col = 0;
  for (const auto& r : records) {
    const long m = r.samples.size();
    set.points.middleCols(col, m) = r.samples.points;
    for (long i = 0; i < m; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      set.log_weights.push_back(r.log_weights[idx]);
      set.tags.push_back({r.t, r.samples.proposal[idx], r.samples.draw[idx]});
    }
    col += m;
  }
  set.first_iteration = records.front().t;
  set.last_iteration = records.back().t;
  return set;
}

WeightedSampleSet window_select(const WeightedSampleSet& set, WindowPolicy policy) {
  if (set.size() == 0) throw EmptyWindow("window_select: empty sample set");
  if (policy == WindowPolicy::All) return set;
  const int total = set.last_iteration;
  const int first = total / 2 + 1;
  std::vector<long> keep;
  for (long i = 0; i < set.size(); ++i) {
    if (set.tags[static_cast<std::size_t>(i)].t >= first) keep.push_back(i);
  }
  if (keep.empty()) throw EmptyWindow("window_select: no samples in the last half");
  WeightedSampleSet out;
  out.points.resize(set.dim(), static_cast<long>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    out.points.col(static_cast<long>(j)) = set.points.col(keep[j]);
    out.log_weights.push_back(set.log_weights[static_cast<std::size_t>(keep[j])]);
    out.tags.push_back(set.tags[static_cast<std::size_t>(keep[j])]);
  }
  out.first_iteration = std::max(first, set.first_iteration);
  out.last_iteration = set.last_iteration;
  return out;
}

TestFunction TestFunction::identity() {
  return TestFunction([](const Vec& x) { return x; });
}

TestFunction TestFunction::square() {
  return TestFunction([](const Vec& x) { return Vec(x.cwiseProduct(x)); });
}

TestFunction TestFunction::custom(Fn fn) { return TestFunction(std::move(fn)); }

namespace {

double max_log_weight(const WeightedSampleSet& set) {
  if (set.log_weights.empty()) return -std::numeric_limits<double>::infinity();
  return *std::max_element(set.log_weights.begin(), set.log_weights.end());
}

/// Σ exp(lw - peak)·h(x) together with Σ exp(lw - peak).
std::pair<Vec, double> scaled_sums(const WeightedSampleSet& set, const TestFunction& h, double peak) {
  Vec acc;
  double mass = 0.0;
  for (long i = 0; i < set.size(); ++i) {
    const double w = std::exp(set.log_weights[static_cast<std::size_t>(i)] - peak);
    mass += w;
    if (w == 0.0 && acc.size() != 0) continue;
    const Vec hx = h(set.points.col(i));
    if (acc.size() == 0) acc = Vec::Zero(hx.size());
    acc += w * hx;
  }
  return {acc, mass};
}

}  // namespace

bool weights_degenerate(const WeightedSampleSet& set) {
  return set.size() == 0 || max_log_weight(set) == -std::numeric_limits<double>::infinity();
}

Vec uis_estimate(const WeightedSampleSet& set, const TestFunction& h, double z) {
  if (!(z > 0.0)) throw InvalidParameter("uis_estimate: Z must be positive");
  if (weights_degenerate(set)) throw DegenerateWeights("uis_estimate: all weights are zero");
  const double peak = max_log_weight(set);
  auto [acc, mass] = scaled_sums(set, h, peak);
  return acc * (std::exp(peak - std::log(static_cast<double>(set.size()))) / z);
}

Vec snis_estimate(const WeightedSampleSet& set, const TestFunction& h) {
  if (weights_degenerate(set)) throw DegenerateWeights("snis_estimate: all weights are zero");
  const double peak = max_log_weight(set);
  auto [acc, mass] = scaled_sums(set, h, peak);
  return acc / mass;
}

std::vector<double> normalized_weights(const WeightedSampleSet& set) {
  if (weights_degenerate(set)) throw DegenerateWeights("normalized_weights: all weights are zero");
  const double lse = log_sum_exp(set.log_weights);
  std::vector<double> out(set.log_weights.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(set.log_weights[i] - lse);
  return out;
}

double z_estimate(const WeightedSampleSet& set) {
  if (weights_degenerate(set)) return 0.0;
  return std::exp(log_sum_exp(set.log_weights) - std::log(static_cast<double>(set.size())));
}

Chi2Estimate chi2_estimate(const TargetDensity& target, const ProposalBank& bank, int num_samples, RngStream& rng) {
  const auto truth = target.truth();
  if (!truth.normalizing_constant) throw RequiresKnownZ("chi2_estimate: target has no known normalizing constant");
  if (num_samples < 1) throw InvalidParameter("chi2_estimate: need at least one sample");
  const double log_z = std::log(*truth.normalizing_constant);

  Mat points(bank.dim(), num_samples);
  for (int i = 0; i < num_samples; ++i) points.col(i) = bank.sample_mixture(rng);
  const Vec log_psi = bank.mixture_log_pdf_columns(points);

  // r = π̃/ψ; E[r²] via log-space accumulation.
  std::vector<double> log_r2(static_cast<std::size_t>(num_samples));
  for (int i = 0; i < num_samples; ++i) {
    log_r2[static_cast<std::size_t>(i)] = 2.0 * (target.log_density(points.col(i)) - log_z - log_psi[i]);
  }
  const double log_m = std::log(static_cast<double>(num_samples));
  const double log_mean = log_sum_exp(log_r2) - log_m;
  if (log_mean > std::log(kChi2Overflow)) {
    return {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }
  const double mean = std::exp(log_mean);
  double var = 0.0;
  for (double v : log_r2) {
    const double diff = std::exp(v) - mean;
    var += diff * diff;
  }
  var /= std::max(1, num_samples - 1);
  return {std::max(0.0, mean - 1.0), std::sqrt(var / num_samples)};
}

EstimateReport make_report(const WeightedSampleSet& window, std::optional<double> known_z) {
  EstimateReport r;
  r.window_first = window.first_iteration;
  r.window_last = window.last_iteration;
  r.z_hat = z_estimate(window);
  if (weights_degenerate(window)) {
    r.failed = true;
    return r;
  }
  r.snis_mean = snis_estimate(window, TestFunction::identity());
  r.snis_second_moment = snis_estimate(window, TestFunction::square());
  if (known_z) {
    r.uis_mean = uis_estimate(window, TestFunction::identity(), *known_z);
    r.uis_second_moment = uis_estimate(window, TestFunction::square(), *known_z);
  }
  if (!std::isfinite(r.z_hat) || !r.snis_mean.allFinite() || !r.snis_second_moment.allFinite()) r.failed = true;
  return r;
}

EstimateReport failed_report(long dim) {
  EstimateReport r;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.z_hat = nan;
  r.snis_mean = Vec::Constant(dim, nan);
  r.snis_second_moment = Vec::Constant(dim, nan);
  r.failed = true;
  return r;
}

RmseTable rmse_aggregate(std::span<const EstimateReport> reports, const GroundTruth& truth,
                         MomentEstimator moments) {
  if (reports.empty()) throw InvalidParameter("rmse_aggregate: no reports");
  if (!truth.normalizing_constant && !truth.mean && !truth.second_moment) {
    throw MissingTruth("rmse_aggregate: target has no ground truth");
  }
  RmseTable table;
  double sz = 0.0, sm = 0.0, ss = 0.0, chi = 0.0;
  int chi_count = 0;
  for (const auto& r : reports) {
    if (r.failed) {
      ++table.runs_failed;
      continue;
    }
    ++table.runs_used;
    const Vec* mean = &r.snis_mean;
    const Vec* second = &r.snis_second_moment;
    if (moments == MomentEstimator::Uis) {
      if (!r.uis_mean || !r.uis_second_moment) throw MissingTruth("rmse_aggregate: UIS estimates need a known Z");
      mean = &*r.uis_mean;
      second = &*r.uis_second_moment;
    }
    if (truth.normalizing_constant) sz += std::pow(r.z_hat - *truth.normalizing_constant, 2);
    if (truth.mean) sm += (*mean - *truth.mean).squaredNorm();
    if (truth.second_moment) ss += (*second - *truth.second_moment).squaredNorm();
    if (r.chi2) {
      chi += *r.chi2;
      ++chi_count;
    }
  }
  if (table.runs_used == 0) return table;
  const double n = table.runs_used;
  if (truth.normalizing_constant) table.z = std::sqrt(sz / n);
  if (truth.mean) {
    table.mean = std::sqrt(sm / n);
    table.mse_mean = sm / n;
  }
  if (truth.second_moment) table.second_moment = std::sqrt(ss / n);
  if (chi_count > 0) table.chi2_mean = chi / chi_count;
  return table;
}

}  // namespace gramis
