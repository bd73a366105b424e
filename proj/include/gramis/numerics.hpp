#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>

#include <Eigen/Dense>

#include "gramis/errors.hpp"

namespace gramis {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Pivot threshold used by the SPD test: a pivot at or below
/// `kPdTolerance * max(1, max diagonal)` rejects the matrix.
inline constexpr double kPdTolerance = 1e-10;

/**
 * Cholesky factor L (lower triangular, L Lᵀ = M) of a symmetric positive
 * definite matrix together with log|M|.
 *
 * Instances only come out of spd_factorize / try_spd_factorize, so a
 * SpdFactor always describes a matrix that passed the pivot test.
 */
class SpdFactor {
 public:
  SpdFactor() = default;

  long dim() const { return lower_.rows(); }
  const Mat& lower() const { return lower_; }
  double log_det() const { return log_det_; }

  /// Solves M·y = v.
  Vec solve(const Vec& v) const;
  /// Solves M·Y = B column-wise.
  Mat solve(const Mat& b) const;
  /// vᵀ M⁻¹ v.
  double quad_form(const Vec& v) const;
  /// L·z; maps standard normal draws onto N(0, M).
  Vec apply_lower(const Vec& z) const;
  Mat reconstruct() const;
  Mat inverse() const;

 private:
  friend std::optional<SpdFactor> try_spd_factorize(const Mat& m);
  SpdFactor(Mat lower, double log_det) : lower_(std::move(lower)), log_det_(log_det) {}

  Mat lower_;
  double log_det_ = 0.0;
};

/// Symmetrizes `m` and factorizes it; nullopt when some pivot fails the tolerance.
std::optional<SpdFactor> try_spd_factorize(const Mat& m);

/// Throwing form of try_spd_factorize. Throws NotPositiveDefinite or DimensionMismatch.
SpdFactor spd_factorize(const Mat& m);

Vec solve_spd(const SpdFactor& f, const Vec& v);

double log_mvn_pdf(const Vec& x, const Vec& mean, const SpdFactor& cov_factor);

/// log Σ exp(vᵢ). Throws AllNegInfinity when every entry is −∞ (or the span is empty).
double log_sum_exp(std::span<const double> values);

/// Surface area of the unit sphere embedded in Rᵈ, 2π^{d/2} / Γ(d/2).
double unit_sphere_area(int d);

double log_gamma(double x);

/// Deterministic, splittable random stream.
///
/// A stream is keyed by a 64-bit seed and an arbitrary path of stream ids;
/// `split(id)` derives a child that does not overlap with the parent.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0);
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  RngStream split(std::uint64_t stream_id) const;
  std::uint64_t key() const { return key_; }

  double normal();
  double uniform(double low, double high);
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  Vec normal_vector(long d);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// mean + L·z with z ~ N(0, I).
Vec sample_mvn(const Vec& mean, const SpdFactor& cov_factor, RngStream& rng);

}  // namespace gramis
