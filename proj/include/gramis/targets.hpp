#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gramis/numerics.hpp"

namespace gramis {

/// Known properties of a target, used only for scoring estimators.
struct GroundTruth {
  std::optional<double> normalizing_constant;
  std::optional<Vec> mean;
  /// Componentwise E[X_i²].
  std::optional<Vec> second_moment;
};

struct TargetEval {
  double log_density = 0.0;
  Vec grad;
  Mat hessian;
};

/// Unnormalized log-density log π(x) with analytic first and second derivatives.
class TargetDensity {
 public:
  virtual ~TargetDensity() = default;

  virtual long dim() const = 0;
  virtual std::string name() const = 0;

  virtual double log_density(const Vec& x) const = 0;
  virtual Vec grad_log_density(const Vec& x) const { return evaluate(x).grad; }
  virtual Mat hessian_log_density(const Vec& x) const { return evaluate(x).hessian; }
  virtual TargetEval evaluate(const Vec& x) const = 0;

  virtual GroundTruth truth() const { return {}; }
};

/// Σ_ℓ ω_ℓ N(x; γ_ℓ, Σ_ℓ).
class GaussianMixtureTarget final : public TargetDensity {
 public:
  GaussianMixtureTarget(std::vector<double> weights, std::vector<Vec> means, std::vector<Mat> covariances);

  long dim() const override { return dim_; }
  std::string name() const override { return "gaussian_mixture"; }
  double log_density(const Vec& x) const override;
  Vec grad_log_density(const Vec& x) const override;
  TargetEval evaluate(const Vec& x) const override;
  GroundTruth truth() const override;

  std::size_t components() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Vec>& means() const { return means_; }
  const std::vector<Mat>& covariances() const { return covariances_; }

 private:
  long dim_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<Vec> means_;
  std::vector<Mat> covariances_;
  std::vector<SpdFactor> factors_;
  std::vector<Mat> precisions_;
};

/// Mixture of (δ-smoothed) generalized Gaussians
///   ω_ℓ C_ℓ |Σ_ℓ|^{-1/2} exp(-½ (θ_ℓ(x) + δ)^{η_ℓ}),  θ_ℓ(x) = (x-ν_ℓ)ᵀ Σ_ℓ⁻¹ (x-ν_ℓ).
/// C_ℓ is the δ = 0 normalizing constant.
class GGMixtureTarget final : public TargetDensity {
 public:
  static constexpr double kDefaultSmoothing = 1e-5;

  GGMixtureTarget(std::vector<double> weights, std::vector<Vec> means, std::vector<Mat> scales,
                  std::vector<double> shapes, double smoothing = kDefaultSmoothing);

  long dim() const override { return dim_; }
  std::string name() const override { return "gg_mixture"; }
  double log_density(const Vec& x) const override;
  TargetEval evaluate(const Vec& x) const override;
  GroundTruth truth() const override;

  /// log of one normalized component density (without the mixture weight).
  double component_log(std::size_t l, const Vec& x) const;

  std::size_t components() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Vec>& means() const { return means_; }
  const std::vector<Mat>& scales() const { return scales_; }
  const std::vector<double>& shapes() const { return shapes_; }
  double smoothing() const { return smoothing_; }

  /// log C for dimension d and shape η.
  static double log_constant(long d, double shape);
  /// Cov[X] = factor · Σ for one component.
  static double covariance_factor(long d, double shape);

 private:
  void check_smooth(const Vec& x) const;

  long dim_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<Vec> means_;
  std::vector<Mat> scales_;
  std::vector<double> shapes_;
  double smoothing_;
  std::vector<SpdFactor> factors_;
  std::vector<Mat> precisions_;
  std::vector<double> log_norm_;  // log C_ℓ - ½ log|Σ_ℓ|
};

/// Pushforward of N(0, diag(c², 1, …, 1)) through x₂ ↦ x̄₂ - b(x̄₁² - c²).
class BananaTarget final : public TargetDensity {
 public:
  BananaTarget(long dim, double b, double c);

  long dim() const override { return dim_; }
  std::string name() const override { return "banana"; }
  double log_density(const Vec& x) const override;
  Vec grad_log_density(const Vec& x) const override;
  TargetEval evaluate(const Vec& x) const override;
  GroundTruth truth() const override;

  double b() const { return b_; }
  double c() const { return c_; }

  /// The volume-preserving map x ↦ x̄ back to the Gaussian coordinates.
  Vec to_gaussian(const Vec& x) const;

 private:
  long dim_;
  double b_;
  double c_;
};

struct GGScalarParams {
  double alpha;
  double beta;
};

/// (σ, η) ↦ (α, β) of the β/(2αΓ(1/β)) exp(-(|x-ν|/α)^β) parametrization.
GGScalarParams gg_reparam(double sigma, double eta);
/// Inverse of gg_reparam; returns (σ, η).
std::pair<double, double> gg_reparam_inverse(double alpha, double beta);

}  // namespace gramis
