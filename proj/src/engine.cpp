#include "gramis/engine.hpp"

#include <cmath>
#include <numbers>

namespace gramis {

void GramisConfig::validate(long target_dim) const {
  if (num_proposals < 1 || samples_per_proposal < 1 || iterations < 1) {
    throw InvalidParameter("gramis config: N, K and T must be >= 1");
  }
  if (!(init_sigma > 0.0)) throw InvalidParameter("gramis config: sigma must be positive");
  if (!(fixed_step > 0.0)) throw InvalidParameter("gramis config: fixed step must be positive");
  if (backtrack.max_halvings < 1) throw InvalidParameter("gramis config: max_halvings must be >= 1");
  require_same_dim(target_dim, box_low.size(), "gramis config box_low");
  require_same_dim(target_dim, box_high.size(), "gramis config box_high");
  const auto& rep = repulsion;
  if (rep.strength < 0.0) throw InvalidParameter("gramis config: repulsion strength must be >= 0");
  if (rep.schedule == ScheduleKind::Exponential && rep.beta && !(*rep.beta > 0.0)) {
    throw InvalidParameter("gramis config: exponential beta must be positive");
  }
  if (!(rep.distance_floor > 0.0)) throw InvalidParameter("gramis config: distance floor must be positive");
  if (!rep.masses.empty()) {
    if (rep.masses.size() != static_cast<std::size_t>(num_proposals)) {
      throw InvalidParameter("gramis config: need one mass per proposal");
    }
    for (double m : rep.masses) {
      if (!(m > 0.0)) throw InvalidParameter("gramis config: masses must be positive");
    }
  }
}

double exponential_rate_for_attenuation(double attenuation, int total_iterations) {
  if (!(attenuation > 0.0 && attenuation < 1.0)) {
    throw InvalidParameter("attenuation must lie in (0, 1)");
  }
  if (total_iterations < 2) return 0.0;
  return -std::log(attenuation) / static_cast<double>(total_iterations - 1);
}

double schedule_value(const RepulsionConfig& cfg, int t, int total_iterations) {
  if (cfg.zero_last_iteration && t == total_iterations) return 0.0;
  switch (cfg.schedule) {
    case ScheduleKind::Off:
      return 0.0;
    case ScheduleKind::Constant:
      return cfg.strength;
    case ScheduleKind::Exponential: {
      const double beta = cfg.beta ? *cfg.beta : exponential_rate_for_attenuation(cfg.attenuation, total_iterations);
      return cfg.strength * std::exp(-beta * static_cast<double>(t - 1));
    }
  }
  return 0.0;
}

Vec repulsion_sum(std::span<const Vec> means, std::size_t n, double strength, std::span<const double> masses,
                  double distance_floor) {
  const Vec& mu = means[n];
  Vec total = Vec::Zero(mu.size());
  if (strength == 0.0 || means.size() < 2) return total;
  const double dx = static_cast<double>(mu.size());
  const double mn = masses.empty() ? 1.0 : masses[n];
  for (std::size_t j = 0; j < means.size(); ++j) {
    if (j == n) continue;
    const double mj = masses.empty() ? 1.0 : masses[j];
    const Vec d = mu - means[j];
    const double dist = std::max(d.norm(), distance_floor);
    total += (strength * mn * mj / std::pow(dist, dx)) * d;
  }
  return total;
}

Vec repulsion_sum(const ProposalBank& bank, std::size_t n, double strength, std::span<const double> masses,
                  double distance_floor) {
  const auto means = bank.means();
  return repulsion_sum(means, n, strength, masses, distance_floor);
}

Vec poisson_field(std::span<const Vec> means, std::size_t n, double distance_floor) {
  const Vec& mu = means[n];
  const long d = mu.size();
  Vec field = Vec::Zero(d);
  if (means.size() < 2) return field;
  const double dx = static_cast<double>(d);
  const double coeff = 1.0 / unit_sphere_area(static_cast<int>(d));  // Γ(d/2) / (2π^{d/2})
  for (std::size_t j = 0; j < means.size(); ++j) {
    if (j == n) continue;
    const Vec diff = mu - means[j];
    const double dist = std::max(diff.norm(), distance_floor);
    field += (coeff / std::pow(dist, dx)) * diff;
  }
  return field / static_cast<double>(means.size() - 1);
}

BacktrackResult backtrack_stepsize(const TargetDensity& target, const Vec& mu, const Mat& preconditioner,
                                   const BacktrackConfig& cfg) {
  const Vec grad = target.grad_log_density(mu);
  if (!grad.allFinite()) throw NonFiniteGradient("backtracking: non-finite gradient");
  const Vec direction = preconditioner * grad;
  const double base = target.log_density(mu);

  BacktrackResult out;
  double step = cfg.initial_step;
  if (!cfg.enabled) {
    out.step = step;
    out.point = mu + step * direction;
    return out;
  }
  for (int h = 0; h <= cfg.max_halvings; ++h, step *= 0.5) {
    Vec candidate = mu + step * direction;
    const double value = target.log_density(candidate);
    if (value >= base) {
      out.step = step;
      out.point = std::move(candidate);
      out.halvings = h;
      return out;
    }
  }
  out.step = 0.0;
  out.point = mu;
  out.halvings = cfg.max_halvings;
  return out;
}

MeanUpdate adapt_means(const ProposalBank& bank, const TargetDensity& target, int t, const GramisConfig& cfg) {
  const std::size_t n_props = bank.size();
  const auto means = bank.means();
  const double g_t = schedule_value(cfg.repulsion, t, cfg.iterations);
  const long d = bank.dim();
  const Mat fixed = cfg.fixed_step * Mat::Identity(d, d);

  MeanUpdate out;
  out.means.resize(n_props);
  out.step_sizes.resize(n_props);
  for (std::size_t n = 0; n < n_props; ++n) {
    const Mat& precond = cfg.precondition ? bank[n].cov() : fixed;
    BacktrackResult step = backtrack_stepsize(target, means[n], precond, cfg.backtrack);
    out.means[n] = std::move(step.point);
    out.means[n] += repulsion_sum(means, n, g_t, cfg.repulsion.masses, cfg.repulsion.distance_floor);
    out.step_sizes[n] = step.step;
  }
  return out;
}

CovarianceUpdate adapt_covariances(const ProposalBank& bank, const TargetDensity& target) {
  CovarianceUpdate out;
  out.covariances.reserve(bank.size());
  out.factors.reserve(bank.size());
  out.branches.reserve(bank.size());
  for (const auto& p : bank.proposals()) {
    const Mat neg_hessian = -target.hessian_log_density(p.mean());
    if (auto precision = try_spd_factorize(neg_hessian)) {
      Mat cov = precision->inverse();
      if (auto factor = try_spd_factorize(cov)) {
        out.covariances.push_back(std::move(cov));
        out.factors.push_back(*std::move(factor));
        out.branches.push_back(CovarianceBranch::Hessian);
        continue;
      }
    }
    out.covariances.push_back(p.cov());
    out.factors.push_back(p.cov_factor());
    out.branches.push_back(CovarianceBranch::Kept);
  }
  return out;
}

std::vector<double> dm_mis_log_weights(const ProposalBank& bank, const SampleBatch& batch,
                                       const TargetDensity& target) {
  require_same_dim(bank.dim(), batch.dim(), "dm_mis_log_weights");
  const Vec denominators = bank.mixture_log_pdf_columns(batch.points);
  std::vector<double> out(static_cast<std::size_t>(batch.size()));
  for (long i = 0; i < batch.size(); ++i) {
    out[static_cast<std::size_t>(i)] = target.log_density(batch.points.col(i)) - denominators[i];
  }
  return out;
}

std::vector<double> smis_log_weights(const ProposalBank& bank, const SampleBatch& batch,
                                     const TargetDensity& target) {
  require_same_dim(bank.dim(), batch.dim(), "smis_log_weights");
  std::vector<double> out(static_cast<std::size_t>(batch.size()));
  for (long i = 0; i < batch.size(); ++i) {
    const Vec x = batch.points.col(i);
    const auto& q = bank[static_cast<std::size_t>(batch.proposal[static_cast<std::size_t>(i)])];
    out[static_cast<std::size_t>(i)] = target.log_density(x) - q.log_pdf(x);
  }
  return out;
}

ProposalBank initialize_bank(const TargetDensity& target, const GramisConfig& cfg, RngStream& rng) {
  const long d = target.dim();
  const Mat init_cov = cfg.init_sigma * cfg.init_sigma * Mat::Identity(d, d);
  ProposalBank bank = bank_init(cfg.box_low, cfg.box_high, cfg.num_proposals, init_cov, rng);
  if (cfg.init_cov_mode == InitCovMode::Hessian) {
    CovarianceUpdate upd = adapt_covariances(bank, target);
    for (std::size_t n = 0; n < bank.size(); ++n) {
      bank[n].set_covariance(std::move(upd.covariances[n]), std::move(upd.factors[n]));
    }
  }
  bank.set_iteration(0);
  return bank;
}

IterationRecord gramis_step(ProposalBank& bank, const TargetDensity& target, const GramisConfig& cfg, int t,
                            std::span<RngStream> sample_streams) {
  MeanUpdate means = adapt_means(bank, target, t, cfg);
  for (std::size_t n = 0; n < bank.size(); ++n) bank[n].set_mean(std::move(means.means[n]));

  CovarianceUpdate covs = adapt_covariances(bank, target);
  for (std::size_t n = 0; n < bank.size(); ++n) {
    bank[n].set_covariance(std::move(covs.covariances[n]), std::move(covs.factors[n]));
  }
  bank.set_iteration(t);

  IterationRecord rec;
  rec.t = t;
  rec.samples = bank_sample(bank, cfg.samples_per_proposal, sample_streams);
  rec.log_weights = dm_mis_log_weights(bank, rec.samples, target);
  rec.means = bank.means();
  rec.covariances.reserve(bank.size());
  for (const auto& p : bank.proposals()) rec.covariances.push_back(p.cov());
  rec.step_sizes = std::move(means.step_sizes);
  rec.branches = std::move(covs.branches);
  return rec;
}

RunResult run_gramis(const TargetDensity& target, const GramisConfig& cfg, const RngStream& rng) {
  cfg.validate(target.dim());
  RngStream init_stream = rng.split(0);
  std::vector<RngStream> streams;
  streams.reserve(static_cast<std::size_t>(cfg.num_proposals));
  for (int n = 0; n < cfg.num_proposals; ++n) streams.push_back(rng.split(1 + static_cast<std::uint64_t>(n)));

  RunResult result;
  result.final_bank = initialize_bank(target, cfg, init_stream);
  result.records.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int t = 1; t <= cfg.iterations; ++t) {
    result.records.push_back(gramis_step(result.final_bank, target, cfg, t, streams));
  }
  return result;
}

}  // namespace gramis
