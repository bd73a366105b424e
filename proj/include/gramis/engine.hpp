#pragma once

#include <optional>
#include <vector>

#include "gramis/numerics.hpp"
#include "gramis/proposals.hpp"
#include "gramis/targets.hpp"

namespace gramis {

enum class ScheduleKind { Off, Constant, Exponential };

/// Repulsion strength G_t and per-proposal masses m_n.
struct RepulsionConfig {
  ScheduleKind schedule = ScheduleKind::Off;
  /// G for Constant, G₁ for Exponential.
  double strength = 0.0;
  /// Decay rate; when unset, derived so that G_T = attenuation · G₁.
  std::optional<double> beta;
  double attenuation = 0.01;
  /// Empty means m_n = 1 for every proposal.
  std::vector<double> masses;
  double distance_floor = 1e-9;
  /// Force G_T = 0 so the last batch is drawn from unrepelled proposals.
  bool zero_last_iteration = false;
};

struct BacktrackConfig {
  /// When false every proposal takes the full step θ = initial_step.
  bool enabled = true;
  int max_halvings = 30;
  double initial_step = 1.0;
};

enum class InitCovMode { Isotropic, Hessian };

struct GramisConfig {
  int num_proposals = 50;        // N
  int samples_per_proposal = 20; // K
  int iterations = 20;           // T
  RepulsionConfig repulsion;
  BacktrackConfig backtrack;
  Vec box_low;
  Vec box_high;
  /// Initial covariance σ²·I.
  double init_sigma = 1.0;
  InitCovMode init_cov_mode = InitCovMode::Isotropic;
  /// When false the gradient step uses fixed_step·I instead of Σ.
  bool precondition = true;
  double fixed_step = 0.1;

  void validate(long target_dim) const;
};

enum class CovarianceBranch { Hessian, Kept };

struct IterationRecord {
  int t = 0;
  std::vector<Vec> means;
  std::vector<Mat> covariances;
  std::vector<double> step_sizes;
  std::vector<CovarianceBranch> branches;
  SampleBatch samples;
  std::vector<double> log_weights;
};

struct RunResult {
  std::vector<IterationRecord> records;
  /// Bank after the final iteration (ψ^{(T)}).
  ProposalBank final_bank;
};

struct BacktrackResult {
  double step = 0.0;
  Vec point;
  int halvings = 0;
};

/// G_t at iteration t ∈ [1, T].
double schedule_value(const RepulsionConfig& cfg, int t, int total_iterations);

/// β = -log(attenuation) / (T - 1).
double exponential_rate_for_attenuation(double attenuation, int total_iterations);

/// Σ_{j≠n} G m_n m_j d_nj / ‖d_nj‖^{d_x} with d_nj = μ_n - μ_j.
Vec repulsion_sum(std::span<const Vec> means, std::size_t n, double strength, std::span<const double> masses,
                  double distance_floor = 1e-9);
Vec repulsion_sum(const ProposalBank& bank, std::size_t n, double strength, std::span<const double> masses,
                  double distance_floor = 1e-9);

/// Empirical Poisson field at μ_n with the other means as unit sources.
Vec poisson_field(std::span<const Vec> means, std::size_t n, double distance_floor = 1e-9);

/// Halves θ from cfg.initial_step until log π(μ + θ P ∇log π(μ)) ≥ log π(μ); θ = 0 when every trial fails.
BacktrackResult backtrack_stepsize(const TargetDensity& target, const Vec& mu, const Mat& preconditioner,
                                   const BacktrackConfig& cfg);

struct MeanUpdate {
  std::vector<Vec> means;
  std::vector<double> step_sizes;
};

/// New means for every proposal, all computed from the current bank state.
MeanUpdate adapt_means(const ProposalBank& bank, const TargetDensity& target, int t, const GramisConfig& cfg);

struct CovarianceUpdate {
  std::vector<Mat> covariances;
  std::vector<SpdFactor> factors;
  std::vector<CovarianceBranch> branches;
};

/// Safe rule: Σ_n = (-∇²log π(μ_n))⁻¹ when that is positive definite, else the current Σ_n.
CovarianceUpdate adapt_covariances(const ProposalBank& bank, const TargetDensity& target);

/// log π(x) - log((1/N) Σ_j q_j(x)) for each sample.
std::vector<double> dm_mis_log_weights(const ProposalBank& bank, const SampleBatch& batch,
                                       const TargetDensity& target);
/// log π(x) - log q_n(x), with n the proposal that drew x.
std::vector<double> smis_log_weights(const ProposalBank& bank, const SampleBatch& batch,
                                     const TargetDensity& target);

ProposalBank initialize_bank(const TargetDensity& target, const GramisConfig& cfg, RngStream& rng);

/// Advances `bank` by one iteration (means, covariances, sampling, weights).
IterationRecord gramis_step(ProposalBank& bank, const TargetDensity& target, const GramisConfig& cfg, int t,
                            std::span<RngStream> sample_streams);

RunResult run_gramis(const TargetDensity& target, const GramisConfig& cfg, const RngStream& rng);

}  // namespace gramis
