#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gramis/estimators.hpp"

using namespace gramis;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

WeightedSampleSet make_set(const std::vector<Vec>& points, const std::vector<double>& log_weights, int t = 1) {
  WeightedSampleSet s;
  s.points.resize(points.front().size(), static_cast<long>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    s.points.col(static_cast<long>(i)) = points[i];
    s.tags.push_back({t, static_cast<int>(i), 0});
  }
  s.log_weights = log_weights;
  s.first_iteration = t;
  s.last_iteration = t;
  return s;
}

/// T records of one proposal and K = 2 draws each; the point value encodes the iteration.
std::vector<IterationRecord> fake_records(int total) {
  std::vector<IterationRecord> recs;
  for (int t = 1; t <= total; ++t) {
    IterationRecord r;
    r.t = t;
    r.samples.points = Mat::Constant(1, 2, static_cast<double>(t));
    r.samples.proposal = {0, 0};
    r.samples.draw = {0, 1};
    r.log_weights = {0.0, 0.0};
    recs.push_back(std::move(r));
  }
  return recs;
}

/// N(0,1) density that misreports its normalizing constant.
class WrongZTarget final : public TargetDensity {
 public:
  long dim() const override { return 1; }
  std::string name() const override { return "wrong_z"; }
  double log_density(const Vec& x) const override { return -0.5 * x[0] * x[0] - 0.5 * std::log(2 * std::numbers::pi); }
  TargetEval evaluate(const Vec& x) const override { return {log_density(x), v1(-x[0]), -Mat::Identity(1, 1)}; }
  GroundTruth truth() const override { return {1e-20, std::nullopt, std::nullopt}; }
};

class NoTruthTarget final : public TargetDensity {
 public:
  long dim() const override { return 1; }
  std::string name() const override { return "no_truth"; }
  double log_density(const Vec& x) const override { return -0.5 * x[0] * x[0]; }
  TargetEval evaluate(const Vec& x) const override { return {log_density(x), v1(-x[0]), -Mat::Identity(1, 1)}; }
};

EstimateReport report_with(double z, const Vec& mean, const Vec& second) {
  EstimateReport r;
  r.z_hat = z;
  r.snis_mean = mean;
  r.snis_second_moment = second;
  return r;
}

}  // namespace

TEST_CASE("last-half window") {
  const auto recs = fake_records(20);
  const WeightedSampleSet all = collect_samples(recs);
  CHECK(all.size() == 40);
  CHECK(all.first_iteration == 1);
  CHECK(all.last_iteration == 20);
  const WeightedSampleSet half = window_select(all, WindowPolicy::LastHalf);
  CHECK(half.first_iteration == 11);
  CHECK(half.last_iteration == 20);
  CHECK(half.size() == 20);
  CHECK(half.points.minCoeff() == 11.0);
  CHECK(window_select(all, WindowPolicy::All).size() == 40);

  const auto odd = window_select(collect_samples(fake_records(5)), WindowPolicy::LastHalf);
  CHECK(odd.first_iteration == 3);
  CHECK(odd.size() == 6);

  const auto single = window_select(collect_samples(fake_records(1)), WindowPolicy::LastHalf);
  CHECK(single.first_iteration == 1);
  CHECK(single.size() == 2);

  CHECK_THROWS_AS(window_select(WeightedSampleSet{}, WindowPolicy::All), EmptyWindow);
}

TEST_CASE("uis examples") {
  const auto single = make_set({v1(2.0)}, {std::log(2.0)});
  CHECK(uis_estimate(single, TestFunction::identity(), 1.0)[0] == doctest::Approx(4.0));
  CHECK(uis_estimate(single, TestFunction::identity(), 2.0)[0] == doctest::Approx(2.0));
  const auto two = make_set({v1(1.0), v1(3.0)}, {0.0, std::log(3.0)});
  CHECK(uis_estimate(two, TestFunction::square(), 1.0)[0] == doctest::Approx((1.0 + 27.0) / 2.0));
  CHECK_THROWS_AS(uis_estimate(make_set({v1(1.0)}, {-INFINITY}), TestFunction::identity(), 1.0), DegenerateWeights);
}

TEST_CASE("snis examples") {
  const auto set = make_set({v2(0, 0), v2(2, 4), v2(-1, 1)}, {0.0, 1.0, -2.0});
  const auto constant = TestFunction::custom([](const Vec&) { return v1(7.0); });
  CHECK(snis_estimate(set, constant)[0] == doctest::Approx(7.0).epsilon(1e-15));

  const auto equal = make_set({v1(1.0), v1(2.0), v1(6.0)}, {0.3, 0.3, 0.3});
  CHECK(snis_estimate(equal, TestFunction::identity())[0] == doctest::Approx(3.0).epsilon(1e-15));

  const auto w = normalized_weights(set);
  double total = 0.0;
  for (double x : w) total += x;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(std::exp(1.0) / (1.0 + std::exp(1.0) + std::exp(-2.0))).epsilon(1e-14));

  const Vec m = snis_estimate(set, TestFunction::identity());
  CHECK(m[0] >= -1.0);
  CHECK(m[0] <= 2.0);
  CHECK(m[1] >= 0.0);
  CHECK(m[1] <= 4.0);
}

TEST_CASE("snis is invariant to a common weight offset and stable at large log weights") {
  const auto a = make_set({v1(1.0), v1(5.0)}, {0.0, std::log(3.0)});
  const auto b = make_set({v1(1.0), v1(5.0)}, {800.0, 800.0 + std::log(3.0)});
  CHECK(snis_estimate(a, TestFunction::identity())[0] == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(snis_estimate(b, TestFunction::identity())[0] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK_THROWS_AS(snis_estimate(make_set({v1(1.0)}, {-INFINITY}), TestFunction::identity()), DegenerateWeights);
}

TEST_CASE("z estimate examples") {
  CHECK(z_estimate(make_set({v1(0), v1(1)}, {0.0, std::log(3.0)})) == doctest::Approx(2.0));
  const auto degenerate = make_set({v1(0), v1(1)}, {-INFINITY, -INFINITY});
  CHECK(z_estimate(degenerate) == 0.0);
  CHECK(weights_degenerate(degenerate));
  CHECK(make_report(degenerate, 1.0).failed);
}

TEST_CASE("z estimate from proposal draws is close to one") {
  const GaussianMixtureTarget target({1.0}, {v2(0.5, -0.5)}, {Mat::Identity(2, 2)});
  const ProposalBank bank({GaussianProposal(v2(0, 0), 2.0 * Mat::Identity(2, 2))});
  RngStream rng(51);
  const SampleBatch batch = bank_sample(bank, 100000, rng);
  IterationRecord rec;
  rec.t = 1;
  rec.samples = batch;
  rec.log_weights = dm_mis_log_weights(bank, batch, target);
  const WeightedSampleSet set = collect_samples(std::vector<IterationRecord>{rec});
  const double z = z_estimate(set);
  CHECK(z >= 0.99);
  CHECK(z <= 1.01);

  const EstimateReport r = make_report(set, 1.0);
  CHECK_FALSE(r.failed);
  REQUIRE(r.uis_mean.has_value());
  CHECK((r.snis_mean - v2(0.5, -0.5)).norm() < 0.03);
  CHECK((*r.uis_mean - v2(0.5, -0.5)).norm() < 0.03);
  CHECK_FALSE(make_report(set, std::nullopt).uis_mean.has_value());
}

TEST_CASE("uis is unbiased within three standard errors") {
  // 2000 independent 50-sample estimates of E[X] = 1 for N(1,1) under a N(0, 4) proposal.
  const GaussianMixtureTarget target({1.0}, {v1(1.0)}, {Mat::Identity(1, 1)});
  const ProposalBank bank({GaussianProposal(v1(0.0), 4.0 * Mat::Identity(1, 1))});
  RngStream rng(52);
  const int reps = 2000;
  double s = 0.0;
  double s2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    IterationRecord rec;
    rec.t = 1;
    rec.samples = bank_sample(bank, 50, rng);
    rec.log_weights = dm_mis_log_weights(bank, rec.samples, target);
    const double e = uis_estimate(collect_samples(std::vector<IterationRecord>{rec}), TestFunction::identity(), 1.0)[0];
    s += e;
    s2 += e * e;
  }
  const double mean = s / reps;
  const double se = std::sqrt((s2 / reps - mean * mean) / reps);
  CHECK(std::abs(mean - 1.0) < 3.0 * se);
}

TEST_CASE("chi-square divergence of a wider gaussian") {
  // π = N(0,1), ψ = N(0,2): ∫π²/ψ = 2/√3.
  const GaussianMixtureTarget target({1.0}, {v1(0.0)}, {Mat::Identity(1, 1)});
  const ProposalBank bank({GaussianProposal(v1(0.0), 2.0 * Mat::Identity(1, 1))});
  RngStream rng(53);
  const Chi2Estimate c = chi2_estimate(target, bank, 100000, rng);
  const double exact = 2.0 / std::sqrt(3.0) - 1.0;
  CHECK(std::abs(c.value - exact) < 3.0 * c.standard_error);

  const ProposalBank same({GaussianProposal(v1(0.0), Mat::Identity(1, 1))});
  const Chi2Estimate zero = chi2_estimate(target, same, 1000, rng);
  CHECK(zero.value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("chi-square overflow and missing normalizing constant") {
  const ProposalBank bank({GaussianProposal(v1(0.0), Mat::Identity(1, 1))});
  RngStream rng(54);
  CHECK(std::isinf(chi2_estimate(WrongZTarget(), bank, 100, rng).value));
  CHECK_THROWS_AS(chi2_estimate(NoTruthTarget(), bank, 100, rng), RequiresKnownZ);
  CHECK_THROWS_AS(chi2_estimate(WrongZTarget(), bank, 0, rng), InvalidParameter);
}

TEST_CASE("rmse aggregation examples") {
  GroundTruth truth;
  truth.normalizing_constant = 1.0;
  truth.mean = v2(0, 0);
  truth.second_moment = v2(1, 1);

  const std::vector<EstimateReport> one{report_with(1.1, v2(3, 4), v2(1, 1))};
  const RmseTable t = rmse_aggregate(one, truth);
  CHECK(*t.z == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(*t.mean == doctest::Approx(5.0));
  CHECK(*t.mse_mean == doctest::Approx(25.0));
  CHECK(*t.second_moment == doctest::Approx(0.0));
  CHECK(t.runs_used == 1);

  std::vector<EstimateReport> mixed{report_with(1.0, v2(1, 0), v2(1, 1)), report_with(1.0, v2(0, 3), v2(1, 1)),
                                    failed_report(2)};
  const RmseTable m = rmse_aggregate(mixed, truth);
  CHECK(*m.mean == doctest::Approx(std::sqrt(5.0)));
  CHECK(*m.mse_mean == doctest::Approx(5.0));
  CHECK(*m.z == 0.0);
  CHECK(m.runs_used == 2);
  CHECK(m.runs_failed == 1);
  CHECK_FALSE(m.chi2_mean.has_value());

  GroundTruth partial;
  partial.normalizing_constant = 1.0;
  const RmseTable p = rmse_aggregate(one, partial);
  CHECK(p.z.has_value());
  CHECK_FALSE(p.mean.has_value());

  CHECK_THROWS_AS(rmse_aggregate(one, truth, MomentEstimator::Uis), MissingTruth);
  std::vector<EstimateReport> uis = one;
  uis[0].uis_mean = v2(0, 1);
  uis[0].uis_second_moment = v2(1, 3);
  const RmseTable u = rmse_aggregate(uis, truth, MomentEstimator::Uis);
  CHECK(*u.mean == doctest::Approx(1.0));
  CHECK(*u.second_moment == doctest::Approx(2.0));
}

TEST_CASE("dm-mis is unbiased and no worse than s-mis") {
  // One-dimensional N(0,1) target, two mismatched proposals, K = 5 draws each.
  const GaussianMixtureTarget target({1.0}, {v1(0.0)}, {Mat::Identity(1, 1)});
  const ProposalBank bank({GaussianProposal(v1(-1.5), 0.5 * Mat::Identity(1, 1)),
                           GaussianProposal(v1(1.0), 2.0 * Mat::Identity(1, 1))});
  RngStream rng(55);
  const int reps = 1000;
  double dm_s = 0.0;
  double dm_s2 = 0.0;
  double sm_s = 0.0;
  double sm_s2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    IterationRecord rec;
    rec.t = 1;
    rec.samples = bank_sample(bank, 5, rng);
    rec.log_weights = dm_mis_log_weights(bank, rec.samples, target);
    const double dm = z_estimate(collect_samples(std::vector<IterationRecord>{rec}));
    rec.log_weights = smis_log_weights(bank, rec.samples, target);
    const double sm = z_estimate(collect_samples(std::vector<IterationRecord>{rec}));
    dm_s += dm;
    dm_s2 += dm * dm;
    sm_s += sm;
    sm_s2 += sm * sm;
  }
  const double dm_mean = dm_s / reps;
  const double dm_var = dm_s2 / reps - dm_mean * dm_mean;
  const double sm_var = sm_s2 / reps - (sm_s / reps) * (sm_s / reps);
  CHECK(std::abs(dm_mean - 1.0) < 3.0 * std::sqrt(dm_var / reps));
  CHECK(dm_var <= sm_var);
}
