#include "gramis/targets.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace gramis {

namespace {

void validate_weights(const std::vector<double>& w) {
  if (w.empty()) throw InvalidParameter("mixture needs at least one component");
  double total = 0.0;
  for (double v : w) {
    if (!(v > 0.0)) throw InvalidParameter("mixture weights must be positive");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidParameter("mixture weights must sum to 1");
}

std::vector<double> softmax_inplace(std::vector<double>& logs) {
  const double lse = log_sum_exp(logs);
  std::vector<double> r(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) r[i] = std::exp(logs[i] - lse);
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gaussian mixture

GaussianMixtureTarget::GaussianMixtureTarget(std::vector<double> weights, std::vector<Vec> means,
                                             std::vector<Mat> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covariances_(std::move(covariances)) {
  validate_weights(weights_);
  if (means_.size() != weights_.size() || covariances_.size() != weights_.size()) {
    throw InvalidParameter("gaussian mixture: weights, means and covariances differ in length");
  }
  dim_ = means_.front().size();
  if (dim_ < 1) throw InvalidParameter("gaussian mixture: empty mean");
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    require_same_dim(dim_, means_[l].size(), "gaussian mixture mean");
    require_same_dim(dim_, covariances_[l].rows(), "gaussian mixture covariance");
    factors_.push_back(spd_factorize(covariances_[l]));
    precisions_.push_back(factors_.back().inverse());
    log_weights_.push_back(std::log(weights_[l]));
  }
}

double GaussianMixtureTarget::log_density(const Vec& x) const {
  require_same_dim(dim_, x.size(), "gaussian mixture");
  std::vector<double> logs(weights_.size());
  for (std::size_t l = 0; l < logs.size(); ++l) {
    logs[l] = log_weights_[l] + log_mvn_pdf(x, means_[l], factors_[l]);
  }
  return log_sum_exp(logs);
}

Vec GaussianMixtureTarget::grad_log_density(const Vec& x) const {
  require_same_dim(dim_, x.size(), "gaussian mixture");
  std::vector<double> logs(weights_.size());
  for (std::size_t l = 0; l < logs.size(); ++l) {
    logs[l] = log_weights_[l] + log_mvn_pdf(x, means_[l], factors_[l]);
  }
  const auto resp = softmax_inplace(logs);
  Vec g = Vec::Zero(dim_);
  for (std::size_t l = 0; l < resp.size(); ++l) g -= resp[l] * (precisions_[l] * (x - means_[l]));
  return g;
}

TargetEval GaussianMixtureTarget::evaluate(const Vec& x) const {
  require_same_dim(dim_, x.size(), "gaussian mixture");
  const std::size_t L = weights_.size();
  std::vector<double> logs(L);
  for (std::size_t l = 0; l < L; ++l) {
    logs[l] = log_weights_[l] + log_mvn_pdf(x, means_[l], factors_[l]);
  }
  TargetEval out;
  out.log_density = log_sum_exp(logs);
  std::vector<double> resp(L);
  for (std::size_t l = 0; l < L; ++l) resp[l] = std::exp(logs[l] - out.log_density);

  // ∇²log π = Σ r_ℓ (g_ℓ g_ℓᵀ - P_ℓ) - ḡḡᵀ, with g_ℓ the component score.
  out.grad = Vec::Zero(dim_);
  out.hessian = Mat::Zero(dim_, dim_);
  for (std::size_t l = 0; l < L; ++l) {
    if (resp[l] == 0.0) continue;
    const Vec gl = -(precisions_[l] * (x - means_[l]));
    out.grad += resp[l] * gl;
    out.hessian += resp[l] * (gl * gl.transpose() - precisions_[l]);
  }
  out.hessian -= out.grad * out.grad.transpose();
  out.hessian = 0.5 * (out.hessian + out.hessian.transpose());
  return out;
}

GroundTruth GaussianMixtureTarget::truth() const {
  GroundTruth t;
  t.normalizing_constant = 1.0;
  Vec mean = Vec::Zero(dim_);
  Vec second = Vec::Zero(dim_);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    mean += weights_[l] * means_[l];
    second += weights_[l] * (covariances_[l].diagonal() + means_[l].cwiseProduct(means_[l]));
  }
  t.mean = mean;
  t.second_moment = second;
  return t;
}

// ---------------------------------------------------------------------------
// Generalized Gaussian mixture

GGMixtureTarget::GGMixtureTarget(std::vector<double> weights, std::vector<Vec> means, std::vector<Mat> scales,
                                 std::vector<double> shapes, double smoothing)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      scales_(std::move(scales)),
      shapes_(std::move(shapes)),
      smoothing_(smoothing) {
  validate_weights(weights_);
  const std::size_t L = weights_.size();
  if (means_.size() != L || scales_.size() != L || shapes_.size() != L) {
    throw InvalidParameter("gg mixture: parameter lists differ in length");
  }
  if (!(smoothing_ >= 0.0)) throw InvalidParameter("gg mixture: smoothing must be >= 0");
  dim_ = means_.front().size();
  if (dim_ < 1) throw InvalidParameter("gg mixture: empty mean");
  for (std::size_t l = 0; l < L; ++l) {
    require_same_dim(dim_, means_[l].size(), "gg mixture mean");
    require_same_dim(dim_, scales_[l].rows(), "gg mixture scale");
    if (!(shapes_[l] > 0.0)) throw InvalidParameter("gg mixture: shapes must be positive");
    factors_.push_back(spd_factorize(scales_[l]));
    precisions_.push_back(factors_.back().inverse());
    log_weights_.push_back(std::log(weights_[l]));
    log_norm_.push_back(log_constant(dim_, shapes_[l]) - 0.5 * factors_.back().log_det());
  }
}

double GGMixtureTarget::log_constant(long d, double shape) {
  const double dd = static_cast<double>(d);
  const double k = dd / (2.0 * shape);
  return std::log(dd) + log_gamma(0.5 * dd) - 0.5 * dd * std::log(std::numbers::pi) - log_gamma(1.0 + k) -
         (1.0 + k) * std::log(2.0);
}

double GGMixtureTarget::covariance_factor(long d, double shape) {
  const double dd = static_cast<double>(d);
  return std::exp(std::log(2.0) / shape + log_gamma((dd + 2.0) / (2.0 * shape)) - std::log(dd) -
                  log_gamma(dd / (2.0 * shape)));
}

double GGMixtureTarget::component_log(std::size_t l, const Vec& x) const {
  require_same_dim(dim_, x.size(), "gg mixture");
  const double theta = factors_.at(l).quad_form(x - means_[l]);
  return log_norm_[l] - 0.5 * std::pow(theta + smoothing_, shapes_[l]);
}

double GGMixtureTarget::log_density(const Vec& x) const {
  require_same_dim(dim_, x.size(), "gg mixture");
  std::vector<double> logs(weights_.size());
  for (std::size_t l = 0; l < logs.size(); ++l) logs[l] = log_weights_[l] + component_log(l, x);
  return log_sum_exp(logs);
}

void GGMixtureTarget::check_smooth(const Vec& x) const {
  if (smoothing_ > 0.0) return;
  for (std::size_t l = 0; l < means_.size(); ++l) {
    if (shapes_[l] < 1.0 && x == means_[l]) {
      throw NonSmoothAtMean("gg mixture: derivative undefined at a component mean with shape < 1 and no smoothing");
    }
  }
}

TargetEval GGMixtureTarget::evaluate(const Vec& x) const {
  require_same_dim(dim_, x.size(), "gg mixture");
  check_smooth(x);
  const std::size_t L = weights_.size();
  std::vector<double> logs(L);
  std::vector<double> u(L);  // θ_ℓ + δ
  for (std::size_t l = 0; l < L; ++l) {
    u[l] = factors_[l].quad_form(x - means_[l]) + smoothing_;
    logs[l] = log_weights_[l] + log_norm_[l] - 0.5 * std::pow(u[l], shapes_[l]);
  }
  TargetEval out;
  out.log_density = log_sum_exp(logs);

  // Per component, with a = g'/g and b = g''/g evaluated at θ_ℓ:
  //   ∇g/g = a ∇θ,  ∇²g/g = b ∇θ∇θᵀ + 2a P,  ∇θ = 2P(x-ν).
  out.grad = Vec::Zero(dim_);
  out.hessian = Mat::Zero(dim_, dim_);
  for (std::size_t l = 0; l < L; ++l) {
    const double r = std::exp(logs[l] - out.log_density);
    if (r == 0.0) continue;
    const double eta = shapes_[l];
    const Vec dtheta = 2.0 * (precisions_[l] * (x - means_[l]));
    double a = 0.0;
    double b = 0.0;
    if (u[l] > 0.0) {
      a = -0.5 * eta * std::pow(u[l], eta - 1.0);
      b = -0.5 * eta * (eta - 1.0) * std::pow(u[l], eta - 2.0) + 0.25 * eta * eta * std::pow(u[l], 2.0 * eta - 2.0);
    } else if (eta == 1.0) {
      a = -0.5;
      b = 0.25;
    }
    // At u = 0 with η > 1 the component is flat to second order: a = 0, and ∇θ = 0 kills the b term.
    out.grad += r * a * dtheta;
    out.hessian += r * (b * dtheta * dtheta.transpose() + 2.0 * a * precisions_[l]);
  }
  out.hessian -= out.grad * out.grad.transpose();
  out.hessian = 0.5 * (out.hessian + out.hessian.transpose());
  return out;
}

GroundTruth GGMixtureTarget::truth() const {
  GroundTruth t;
  t.normalizing_constant = 1.0;
  Vec mean = Vec::Zero(dim_);
  Vec second = Vec::Zero(dim_);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    mean += weights_[l] * means_[l];
    const double f = covariance_factor(dim_, shapes_[l]);
    second += weights_[l] * (f * scales_[l].diagonal() + means_[l].cwiseProduct(means_[l]));
  }
  t.mean = mean;
  t.second_moment = second;
  return t;
}

// ---------------------------------------------------------------------------
// Banana

BananaTarget::BananaTarget(long dim, double b, double c) : dim_(dim), b_(b), c_(c) {
  if (dim_ < 2) throw InvalidParameter("banana: dimension must be >= 2");
  if (!(c_ > 0.0)) throw InvalidParameter("banana: c must be positive");
}

Vec BananaTarget::to_gaussian(const Vec& x) const {
  require_same_dim(dim_, x.size(), "banana");
  Vec z = x;
  z[1] = x[1] + b_ * (x[0] * x[0] - c_ * c_);
  return z;
}

double BananaTarget::log_density(const Vec& x) const {
  const Vec z = to_gaussian(x);
  constexpr double kLog2Pi = 1.8378770664093454836;
  const double quad = z[0] * z[0] / (c_ * c_) + z.tail(dim_ - 1).squaredNorm();
  return -0.5 * static_cast<double>(dim_) * kLog2Pi - std::log(c_) - 0.5 * quad;
}

Vec BananaTarget::grad_log_density(const Vec& x) const {
  const Vec z = to_gaussian(x);
  Vec g = -x;
  g[0] = -x[0] / (c_ * c_) - 2.0 * b_ * x[0] * z[1];
  g[1] = -z[1];
  return g;
}

TargetEval BananaTarget::evaluate(const Vec& x) const {
  TargetEval out;
  out.log_density = log_density(x);
  out.grad = grad_log_density(x);
  const Vec z = to_gaussian(x);
  out.hessian = -Mat::Identity(dim_, dim_);
  out.hessian(0, 0) = -1.0 / (c_ * c_) - 4.0 * b_ * b_ * x[0] * x[0] - 2.0 * b_ * z[1];
  out.hessian(0, 1) = -2.0 * b_ * x[0];
  out.hessian(1, 0) = out.hessian(0, 1);
  return out;
}

GroundTruth BananaTarget::truth() const {
  GroundTruth t;
  t.normalizing_constant = 1.0;
  t.mean = Vec::Zero(dim_);
  Vec second = Vec::Ones(dim_);
  second[0] = c_ * c_;
  second[1] = 1.0 + 2.0 * b_ * b_ * std::pow(c_, 4);
  t.second_moment = second;
  return t;
}

// ---------------------------------------------------------------------------

GGScalarParams gg_reparam(double sigma, double eta) {
  if (!(sigma > 0.0) || !(eta > 0.0)) throw InvalidParameter("gg_reparam: sigma and eta must be positive");
  return {std::pow(2.0, 1.0 / (2.0 * eta)) * sigma, 2.0 * eta};
}

std::pair<double, double> gg_reparam_inverse(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw InvalidParameter("gg_reparam_inverse: alpha and beta must be positive");
  return {alpha / std::pow(2.0, 1.0 / beta), 0.5 * beta};
}

}  // namespace gramis
