#pragma once

#include <span>
#include <vector>

#include "gramis/numerics.hpp"

namespace gramis {

/// Gaussian proposal q(x; μ, Σ) with a cached Cholesky factor of Σ.
class GaussianProposal {
 public:
  GaussianProposal(Vec mean, Mat cov);
  /// Takes an already computed factor of `cov`.
  GaussianProposal(Vec mean, Mat cov, SpdFactor factor);

  long dim() const { return mean_.size(); }
  const Vec& mean() const { return mean_; }
  const Mat& cov() const { return cov_; }
  const SpdFactor& cov_factor() const { return factor_; }

  void set_mean(Vec mean);
  /// Throws NotPositiveDefinite; the proposal is left unchanged on failure.
  void set_covariance(Mat cov);
  void set_covariance(Mat cov, SpdFactor factor);

  double log_pdf(const Vec& x) const { return log_mvn_pdf(x, mean_, factor_); }
  /// log q(x) for every column of `points`.
  Vec log_pdf_columns(const Mat& points) const;
  Vec sample(RngStream& rng) const { return sample_mvn(mean_, factor_, rng); }

  /// Non-adapted parameter block; unused by Gaussian proposals.
  std::vector<double> extra;

 private:
  Vec mean_;
  Mat cov_;
  SpdFactor factor_;
};

/// N·K draws stored column-wise in (n, k) row order: column n·K + k comes from proposal n.
struct SampleBatch {
  Mat points;
  std::vector<int> proposal;
  std::vector<int> draw;

  long size() const { return points.cols(); }
  long dim() const { return points.rows(); }
};

/// The N proposals adapted jointly, with the equally weighted mixture ψ = (1/N) Σ q_n.
class ProposalBank {
 public:
  ProposalBank() = default;
  explicit ProposalBank(std::vector<GaussianProposal> proposals);

  std::size_t size() const { return proposals_.size(); }
  long dim() const { return proposals_.front().dim(); }
  int iteration() const { return iteration_; }
  void set_iteration(int t) { iteration_ = t; }

  const GaussianProposal& operator[](std::size_t n) const { return proposals_[n]; }
  GaussianProposal& operator[](std::size_t n) { return proposals_[n]; }
  const std::vector<GaussianProposal>& proposals() const { return proposals_; }

  std::vector<Vec> means() const;

  /// log((1/N) Σ_j q_j(x)).
  double mixture_log_pdf(const Vec& x) const;
  /// mixture_log_pdf for every column of `points`.
  Vec mixture_log_pdf_columns(const Mat& points) const;
  /// Draws one point from ψ.
  Vec sample_mixture(RngStream& rng) const;

 private:
  std::vector<GaussianProposal> proposals_;
  int iteration_ = 0;
};

/// Means i.i.d. uniform on [low, high]; every covariance equals `init_cov`.
ProposalBank bank_init(const Vec& box_low, const Vec& box_high, int n_proposals, const Mat& init_cov,
                       RngStream& rng);

/// K draws per proposal; proposal n uses streams[n].
SampleBatch bank_sample(const ProposalBank& bank, int k, std::span<RngStream> streams);
/// K draws per proposal from a single stream, proposals visited in order.
SampleBatch bank_sample(const ProposalBank& bank, int k, RngStream& rng);

double mixture_log_pdf(const ProposalBank& bank, const Vec& x);

}  // namespace gramis
