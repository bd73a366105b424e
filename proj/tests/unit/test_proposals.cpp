#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "gramis/proposals.hpp"

using namespace gramis;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

const double kLn2Pi = std::log(2.0 * std::numbers::pi);

}  // namespace

TEST_CASE("bank_init keeps means inside the box") {
  RngStream rng(31);
  const ProposalBank bank = bank_init(v2(1, 1), v2(6, 6), 50, Mat::Identity(2, 2), rng);
  REQUIRE(bank.size() == 50);
  for (const auto& q : bank.proposals()) {
    CHECK((q.mean().array() >= 1.0).all());
    CHECK((q.mean().array() <= 6.0).all());
    CHECK((q.cov() - Mat::Identity(2, 2)).norm() == 0.0);
  }
}

TEST_CASE("bank_init with a degenerate box places every mean on the corner") {
  RngStream rng(32);
  const ProposalBank bank = bank_init(v2(2, 2), v2(2, 2), 5, Mat::Identity(2, 2), rng);
  for (const auto& q : bank.proposals()) CHECK(q.mean() == v2(2, 2));
}

TEST_CASE("bank_init is deterministic and validates input") {
  RngStream a(33);
  RngStream b(33);
  const auto ba = bank_init(v2(0, 0), v2(1, 1), 4, Mat::Identity(2, 2), a);
  const auto bb = bank_init(v2(0, 0), v2(1, 1), 4, Mat::Identity(2, 2), b);
  for (std::size_t n = 0; n < 4; ++n) CHECK(ba[n].mean() == bb[n].mean());

  RngStream c(33);
  CHECK_THROWS_AS(bank_init(v2(1, 1), v2(0, 0), 4, Mat::Identity(2, 2), c), InvalidParameter);
  CHECK_THROWS_AS(bank_init(v2(0, 0), Vec::Ones(3), 4, Mat::Identity(2, 2), c), DimensionMismatch);
  CHECK_THROWS_AS(bank_init(v2(0, 0), v2(1, 1), 4, Mat::Identity(3, 3), c), DimensionMismatch);
}

TEST_CASE("bank_sample tags every draw") {
  RngStream rng(34);
  const auto bank = bank_init(v2(0, 0), v2(1, 1), 2, Mat::Identity(2, 2), rng);
  std::vector<RngStream> streams{RngStream(1), RngStream(2)};
  const SampleBatch s = bank_sample(bank, 3, streams);
  REQUIRE(s.size() == 6);
  CHECK(s.dim() == 2);
  std::set<std::pair<int, int>> tags;
  for (long i = 0; i < s.size(); ++i) {
    tags.insert({s.proposal[i], s.draw[i]});
    CHECK(s.proposal[i] == i / 3);
    CHECK(s.draw[i] == i % 3);
  }
  CHECK(tags.size() == 6);
}

TEST_CASE("bank_sample with per-proposal streams is reproducible") {
  RngStream rng(35);
  const auto bank = bank_init(v2(-3, -3), v2(3, 3), 3, Mat::Identity(2, 2), rng);
  std::vector<RngStream> s1{RngStream(7, 1), RngStream(7, 2), RngStream(7, 3)};
  std::vector<RngStream> s2{RngStream(7, 1), RngStream(7, 2), RngStream(7, 3)};
  CHECK(bank_sample(bank, 4, s1).points == bank_sample(bank, 4, s2).points);
  std::vector<RngStream> too_few{RngStream(1)};
  CHECK_THROWS(bank_sample(bank, 4, too_few));
}

TEST_CASE("a tiny covariance concentrates the draws at the mean") {
  GaussianProposal q(v2(3, -1), 1e-8 * Mat::Identity(2, 2));
  RngStream rng(36);
  for (int i = 0; i < 100; ++i) CHECK((q.sample(rng) - v2(3, -1)).norm() < 1e-3);
}

TEST_CASE("mixture of identical proposals equals a single proposal") {
  const Mat cov = (Mat(2, 2) << 1.2, 0.3, 0.3, 0.8).finished();
  GaussianProposal q(v2(1, 2), cov);
  ProposalBank bank(std::vector<GaussianProposal>(7, q));
  RngStream rng(37);
  for (int i = 0; i < 50; ++i) {
    const Vec x = 3.0 * rng.normal_vector(2);
    CHECK(bank.mixture_log_pdf(x) == doctest::Approx(q.log_pdf(x)).epsilon(1e-13));
  }
}

TEST_CASE("two distant proposals") {
  ProposalBank bank({GaussianProposal(v2(100, 0), Mat::Identity(2, 2)),
                     GaussianProposal(v2(-100, 0), Mat::Identity(2, 2))});
  CHECK(bank.mixture_log_pdf(v2(100, 0)) == doctest::Approx(std::log(0.5) - kLn2Pi).epsilon(1e-14));
  const double far = bank.mixture_log_pdf(v2(1e4, 1e4));
  CHECK(std::isfinite(far));
  CHECK(far < -1e7);
  CHECK(mixture_log_pdf(bank, v2(0, 3)) == bank.mixture_log_pdf(v2(0, 3)));
}

TEST_CASE("columnwise evaluation matches pointwise evaluation") {
  RngStream rng(38);
  const auto bank = bank_init(v2(-2, -2), v2(2, 2), 5, 0.7 * Mat::Identity(2, 2), rng);
  const SampleBatch s = bank_sample(bank, 10, rng);
  const Vec cols = bank.mixture_log_pdf_columns(s.points);
  const Vec single = bank[2].log_pdf_columns(s.points);
  for (long i = 0; i < s.size(); ++i) {
    CHECK(cols[i] == doctest::Approx(bank.mixture_log_pdf(s.points.col(i))).epsilon(1e-13));
    CHECK(single[i] == doctest::Approx(bank[2].log_pdf(s.points.col(i))).epsilon(1e-13));
  }
}

TEST_CASE("importance sampling from the mixture normalizes a known density") {
  // Estimate ∫ N(x; 0, I) dx = 1 with draws from ψ; the 3-SE band is computed from the same draws.
  RngStream rng(39);
  const auto bank = bank_init(v2(-1, -1), v2(1, 1), 4, 2.0 * Mat::Identity(2, 2), rng);
  const SpdFactor eye = spd_factorize(Mat::Identity(2, 2));
  const int n = 200000;
  double s = 0.0;
  double s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec x = bank.sample_mixture(rng);
    const double w = std::exp(log_mvn_pdf(x, Vec::Zero(2), eye) - bank.mixture_log_pdf(x));
    s += w;
    s2 += w * w;
  }
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(mean - 1.0) < 3.0 * se);
}

TEST_CASE("covariance updates keep the cached factor consistent") {
  GaussianProposal q(v2(0, 0), Mat::Identity(2, 2));
  const Mat cov = (Mat(2, 2) << 2.0, 0.5, 0.5, 1.0).finished();
  q.set_covariance(cov);
  CHECK((q.cov_factor().reconstruct() - cov).norm() < 1e-14);
  CHECK(q.cov_factor().log_det() == doctest::Approx(spd_factorize(cov).log_det()).epsilon(1e-15));

  CHECK_THROWS_AS(q.set_covariance((Mat(2, 2) << 1, 2, 2, 1).finished()), NotPositiveDefinite);
  CHECK((q.cov() - cov).norm() == 0.0);
  CHECK_THROWS_AS(GaussianProposal(v2(0, 0), Mat::Identity(3, 3)), DimensionMismatch);

  q.set_mean(v2(4, 5));
  CHECK(q.log_pdf(v2(4, 5)) == doctest::Approx(-kLn2Pi - 0.5 * spd_factorize(cov).log_det()).epsilon(1e-14));
}
