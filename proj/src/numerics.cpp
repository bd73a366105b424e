#include "gramis/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gramis {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 seeded_engine(std::uint64_t key) {
  std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                    static_cast<std::uint32_t>(splitmix64(key)),
                    static_cast<std::uint32_t>(splitmix64(key) >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

Vec SpdFactor::solve(const Vec& v) const {
  require_same_dim(dim(), v.size(), "SpdFactor::solve");
  Vec y = lower_.triangularView<Eigen::Lower>().solve(v);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Mat SpdFactor::solve(const Mat& b) const {
  require_same_dim(dim(), b.rows(), "SpdFactor::solve");
  Mat y = lower_.triangularView<Eigen::Lower>().solve(b);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

double SpdFactor::quad_form(const Vec& v) const {
  require_same_dim(dim(), v.size(), "SpdFactor::quad_form");
  return lower_.triangularView<Eigen::Lower>().solve(v).squaredNorm();
}

Vec SpdFactor::apply_lower(const Vec& z) const {
  require_same_dim(dim(), z.size(), "SpdFactor::apply_lower");
  return lower_.triangularView<Eigen::Lower>() * z;
}

Mat SpdFactor::reconstruct() const { return lower_ * lower_.transpose(); }

Mat SpdFactor::inverse() const {
  Mat inv = solve(Mat(Mat::Identity(dim(), dim())));
  return 0.5 * (inv + inv.transpose());
}

std::optional<SpdFactor> try_spd_factorize(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("spd_factorize: matrix is not square");
  }
  const long d = m.rows();
  if (d < 1) throw DimensionMismatch("spd_factorize: empty matrix");
  const Mat a = 0.5 * (m + m.transpose());
  if (!a.allFinite()) return std::nullopt;

  const double threshold = kPdTolerance * std::max(1.0, a.diagonal().maxCoeff());
  Mat l = Mat::Zero(d, d);
  double log_det = 0.0;
  for (long j = 0; j < d; ++j) {
    const double pivot = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > threshold)) return std::nullopt;
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    log_det += 2.0 * std::log(ljj);
    for (long i = j + 1; i < d; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return SpdFactor(std::move(l), log_det);
}

SpdFactor spd_factorize(const Mat& m) {
  auto f = try_spd_factorize(m);
  if (!f) throw NotPositiveDefinite("spd_factorize: matrix is not positive definite");
  return *std::move(f);
}

Vec solve_spd(const SpdFactor& f, const Vec& v) { return f.solve(v); }

double log_mvn_pdf(const Vec& x, const Vec& mean, const SpdFactor& cov_factor) {
  require_same_dim(cov_factor.dim(), x.size(), "log_mvn_pdf(x)");
  require_same_dim(cov_factor.dim(), mean.size(), "log_mvn_pdf(mean)");
  const double d = static_cast<double>(x.size());
  constexpr double kLog2Pi = 1.8378770664093454836;
  return -0.5 * d * kLog2Pi - 0.5 * cov_factor.log_det() - 0.5 * cov_factor.quad_form(x - mean);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw AllNegInfinity("log_sum_exp: empty input");
  const double m = *std::max_element(values.begin(), values.end());
  if (m == -std::numeric_limits<double>::infinity()) {
    throw AllNegInfinity("log_sum_exp: all inputs are -inf");
  }
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double log_gamma(double x) { return std::lgamma(x); }

double unit_sphere_area(int d) {
  if (d < 1) throw InvalidParameter("unit_sphere_area: dimension must be >= 1");
  const double half = 0.5 * d;
  return std::exp(std::log(2.0) + half * std::log(std::numbers::pi) - log_gamma(half));
}

RngStream::RngStream(std::uint64_t seed) : key_(splitmix64(seed)), engine_(seeded_engine(key_)) {}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : key_(splitmix64(splitmix64(seed) ^ splitmix64(stream_id + 0x632be59bd9b4e019ULL))),
      engine_(seeded_engine(key_)) {}

RngStream RngStream::split(std::uint64_t stream_id) const { return RngStream(key_, stream_id); }

double RngStream::normal() { return normal_(engine_); }

double RngStream::uniform(double low, double high) {
  if (low == high) return low;
  return std::uniform_real_distribution<double>(low, high)(engine_);
}

std::size_t RngStream::index(std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

Vec RngStream::normal_vector(long d) {
  Vec z(d);
  for (long i = 0; i < d; ++i) z[i] = normal();
  return z;
}

Vec sample_mvn(const Vec& mean, const SpdFactor& cov_factor, RngStream& rng) {
  require_same_dim(cov_factor.dim(), mean.size(), "sample_mvn");
  return mean + cov_factor.apply_lower(rng.normal_vector(mean.size()));
}

}  // namespace gramis
