#include "gramis/proposals.hpp"

#include <cmath>

namespace gramis {

GaussianProposal::GaussianProposal(Vec mean, Mat cov)
    : mean_(std::move(mean)), cov_(std::move(cov)), factor_(spd_factorize(cov_)) {
  require_same_dim(mean_.size(), cov_.rows(), "GaussianProposal");
}

GaussianProposal::GaussianProposal(Vec mean, Mat cov, SpdFactor factor)
    : mean_(std::move(mean)), cov_(std::move(cov)), factor_(std::move(factor)) {
  require_same_dim(mean_.size(), cov_.rows(), "GaussianProposal");
  require_same_dim(mean_.size(), factor_.dim(), "GaussianProposal factor");
}

Vec GaussianProposal::log_pdf_columns(const Mat& points) const {
  require_same_dim(dim(), points.rows(), "GaussianProposal::log_pdf_columns");
  constexpr double kLog2Pi = 1.8378770664093454836;
  const Mat centered = points.colwise() - mean_;
  const Mat white = factor_.lower().triangularView<Eigen::Lower>().solve(centered);
  const double offset = -0.5 * static_cast<double>(dim()) * kLog2Pi - 0.5 * factor_.log_det();
  return (offset - 0.5 * white.colwise().squaredNorm().array()).matrix().transpose();
}

void GaussianProposal::set_mean(Vec mean) {
  require_same_dim(dim(), mean.size(), "GaussianProposal::set_mean");
  mean_ = std::move(mean);
}

void GaussianProposal::set_covariance(Mat cov) {
  require_same_dim(dim(), cov.rows(), "GaussianProposal::set_covariance");
  SpdFactor f = spd_factorize(cov);
  cov_ = std::move(cov);
  factor_ = std::move(f);
}

void GaussianProposal::set_covariance(Mat cov, SpdFactor factor) {
  require_same_dim(dim(), cov.rows(), "GaussianProposal::set_covariance");
  require_same_dim(dim(), factor.dim(), "GaussianProposal::set_covariance");
  cov_ = std::move(cov);
  factor_ = std::move(factor);
}

ProposalBank::ProposalBank(std::vector<GaussianProposal> proposals) : proposals_(std::move(proposals)) {
  if (proposals_.empty()) throw InvalidParameter("ProposalBank: need at least one proposal");
  for (const auto& p : proposals_) require_same_dim(proposals_.front().dim(), p.dim(), "ProposalBank");
}

std::vector<Vec> ProposalBank::means() const {
  std::vector<Vec> out;
  out.reserve(proposals_.size());
  for (const auto& p : proposals_) out.push_back(p.mean());
  return out;
}

double ProposalBank::mixture_log_pdf(const Vec& x) const {
  require_same_dim(dim(), x.size(), "mixture_log_pdf");
  std::vector<double> logs(proposals_.size());
  for (std::size_t j = 0; j < proposals_.size(); ++j) logs[j] = proposals_[j].log_pdf(x);
  return log_sum_exp(logs) - std::log(static_cast<double>(proposals_.size()));
}

Vec ProposalBank::mixture_log_pdf_columns(const Mat& points) const {
  require_same_dim(dim(), points.rows(), "mixture_log_pdf_columns");
  const long m = points.cols();
  const std::size_t n_props = proposals_.size();
  Mat logs(static_cast<long>(n_props), m);
  for (std::size_t j = 0; j < n_props; ++j) logs.row(static_cast<long>(j)) = proposals_[j].log_pdf_columns(points).transpose();
  const Eigen::RowVectorXd peak = logs.colwise().maxCoeff();
  Vec out(m);
  const double log_n = std::log(static_cast<double>(n_props));
  for (long i = 0; i < m; ++i) {
    out[i] = peak[i] + std::log((logs.col(i).array() - peak[i]).exp().sum()) - log_n;
  }
  return out;
}

Vec ProposalBank::sample_mixture(RngStream& rng) const { return proposals_[rng.index(proposals_.size())].sample(rng); }

double mixture_log_pdf(const ProposalBank& bank, const Vec& x) { return bank.mixture_log_pdf(x); }

ProposalBank bank_init(const Vec& box_low, const Vec& box_high, int n_proposals, const Mat& init_cov,
                       RngStream& rng) {
  require_same_dim(box_low.size(), box_high.size(), "bank_init box");
  require_same_dim(box_low.size(), init_cov.rows(), "bank_init covariance");
  if (n_proposals < 1) throw InvalidParameter("bank_init: N must be >= 1");
  for (long i = 0; i < box_low.size(); ++i) {
    if (!(box_low[i] <= box_high[i])) throw InvalidParameter("bank_init: box_low must not exceed box_high");
  }
  const SpdFactor factor = spd_factorize(init_cov);
  std::vector<GaussianProposal> props;
  props.reserve(static_cast<std::size_t>(n_proposals));
  for (int n = 0; n < n_proposals; ++n) {
    Vec mu(box_low.size());
    for (long i = 0; i < mu.size(); ++i) mu[i] = rng.uniform(box_low[i], box_high[i]);
    props.emplace_back(std::move(mu), init_cov, factor);
  }
  return ProposalBank(std::move(props));
}

namespace {

SampleBatch allocate_batch(const ProposalBank& bank, int k) {
  if (k < 1) throw InvalidParameter("bank_sample: K must be >= 1");
  SampleBatch batch;
  const long total = static_cast<long>(bank.size()) * k;
  batch.points.resize(bank.dim(), total);
  batch.proposal.resize(static_cast<std::size_t>(total));
  batch.draw.resize(static_cast<std::size_t>(total));
  return batch;
}

void fill_proposal(const GaussianProposal& p, int n, int k, RngStream& rng, SampleBatch& batch) {
  for (int j = 0; j < k; ++j) {
    const long col = static_cast<long>(n) * k + j;
    batch.points.col(col) = p.sample(rng);
    batch.proposal[static_cast<std::size_t>(col)] = n;
    batch.draw[static_cast<std::size_t>(col)] = j;
  }
}

}  // namespace

SampleBatch bank_sample(const ProposalBank& bank, int k, std::span<RngStream> streams) {
  if (streams.size() != bank.size()) throw InvalidParameter("bank_sample: need one stream per proposal");
  SampleBatch batch = allocate_batch(bank, k);
  for (std::size_t n = 0; n < bank.size(); ++n) fill_proposal(bank[n], static_cast<int>(n), k, streams[n], batch);
  return batch;
}

SampleBatch bank_sample(const ProposalBank& bank, int k, RngStream& rng) {
  SampleBatch batch = allocate_batch(bank, k);
  for (std::size_t n = 0; n < bank.size(); ++n) fill_proposal(bank[n], static_cast<int>(n), k, rng, batch);
  return batch;
}

}  // namespace gramis
