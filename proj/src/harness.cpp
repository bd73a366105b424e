#include "gramis/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace gramis {

namespace fs = std::filesystem;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Mat m2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

std::vector<Vec> five_means() { return {v2(-10, -10), v2(0, 16), v2(13, 8), v2(-9, 7), v2(14, -4)}; }

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

long TargetSpec::dimension() const {
  if (family == TargetFamily::Banana || means.empty()) return dim;
  return means.front().size();
}

std::unique_ptr<TargetDensity> make_target(const TargetSpec& spec) {
  switch (spec.family) {
    case TargetFamily::GaussianMixture:
      return std::make_unique<GaussianMixtureTarget>(spec.weights, spec.means, spec.matrices);
    case TargetFamily::GGMixture:
      return std::make_unique<GGMixtureTarget>(spec.weights, spec.means, spec.matrices, spec.shapes, spec.smoothing);
    case TargetFamily::Banana:
      return std::make_unique<BananaTarget>(spec.dim, spec.b, spec.c);
  }
  throw ConfigError("unknown target family");
}

TargetSpec toy_target_spec() {
  TargetSpec t;
  t.family = TargetFamily::GaussianMixture;
  t.weights = {0.5, 0.5};
  t.means = {v2(-5, -5), v2(6, 4)};
  t.matrices = {m2(0.25, 0, 0, 0.25), m2(0.52, 0.48, 0.48, 0.52)};
  t.dim = 2;
  return t;
}

TargetSpec gm5_target_spec() {
  TargetSpec t;
  t.family = TargetFamily::GaussianMixture;
  t.weights.assign(5, 0.2);
  t.means = five_means();
  t.matrices = {m2(5, 2, 2, 5), m2(2, -1.3, -1.3, 2), m2(2, 0.8, 0.8, 2), m2(3, 1.2, 1.2, 0.5),
                m2(0.2, -0.1, -0.1, 0.2)};
  t.dim = 2;
  return t;
}

TargetSpec gg5_target_spec(double eta, double smoothing) {
  TargetSpec t;
  t.family = TargetFamily::GGMixture;
  t.weights.assign(5, 0.2);
  t.means = five_means();
  t.matrices.assign(5, Mat::Identity(2, 2));
  t.shapes.assign(5, eta);
  t.smoothing = smoothing;
  t.dim = 2;
  return t;
}

TargetSpec banana_target_spec(long dim, double b, double c) {
  TargetSpec t;
  t.family = TargetFamily::Banana;
  t.dim = dim;
  t.b = b;
  t.c = c;
  return t;
}

TargetSpec parse_target_name(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  if (parts.empty()) throw ConfigError("empty target name");
  const std::string& head = parts[0];
  auto num = [&](std::size_t i) {
    try {
      return std::stod(parts.at(i));
    } catch (const std::exception&) {
      throw ConfigError("bad numeric field in target '" + text + "'");
    }
  };
  if (head == "toy" && parts.size() == 1) return toy_target_spec();
  if (head == "gm5" && parts.size() == 1) return gm5_target_spec();
  if (head == "gg" && (parts.size() == 2 || parts.size() == 3)) {
    return gg5_target_spec(num(1), parts.size() == 3 ? num(2) : GGMixtureTarget::kDefaultSmoothing);
  }
  if (head == "banana" && (parts.size() == 2 || parts.size() == 4)) {
    const auto d = static_cast<long>(num(1));
    return parts.size() == 4 ? banana_target_spec(d, num(2), num(3)) : banana_target_spec(d);
  }
  throw ConfigError("unknown target '" + text + "' (expected toy, gm5, gg:<eta>[:<delta>] or banana:<d>[:<b>:<c>])");
}

void ExperimentConfig::validate() const {
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (chi2_samples < 1) throw ConfigError("chi2_samples must be >= 1");
  const long d = target.dimension();
  if (d < 1) throw ConfigError("target dimension must be >= 1");
  try {
    gramis.validate(d);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (sweep) {
    if (sweep->values.empty()) throw ConfigError("sweep needs at least one value");
    for (int v : sweep->values) {
      if (v < 1) throw ConfigError("sweep values must be positive");
      if (sweep->axis == SweepAxis::Dimension && v < 2) throw ConfigError("dimension sweep values must be >= 2");
    }
    if (sweep->axis == SweepAxis::Dimension && target.family != TargetFamily::Banana) {
      throw ConfigError("dimension sweeps are only defined for banana targets");
    }
  }
  if (grid) {
    require_same_dim(2, grid->low.size(), "grid.low");
    require_same_dim(2, grid->high.size(), "grid.high");
    if (grid->points < 2) throw ConfigError("grid needs at least 2 points per axis");
  }
}

namespace {

bool same_vec(const Vec& a, const Vec& b) { return a.size() == b.size() && a == b; }

bool same_mat(const Mat& a, const Mat& b) { return a.rows() == b.rows() && a.cols() == b.cols() && a == b; }

template <class T, class Eq>
bool same_list(const std::vector<T>& a, const std::vector<T>& b, Eq eq) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!eq(a[i], b[i])) return false;
  }
  return true;
}

bool same_target(const TargetSpec& a, const TargetSpec& b) {
  if (a.family != b.family) return false;
  if (a.family == TargetFamily::Banana) return a.dim == b.dim && a.b == b.b && a.c == b.c;
  return a.weights == b.weights && same_list(a.means, b.means, same_vec) &&
         same_list(a.matrices, b.matrices, same_mat) && a.shapes == b.shapes &&
         (a.family != TargetFamily::GGMixture || a.smoothing == b.smoothing);
}

bool same_gramis(const GramisConfig& a, const GramisConfig& b) {
  const auto& ra = a.repulsion;
  const auto& rb = b.repulsion;
  return a.num_proposals == b.num_proposals && a.samples_per_proposal == b.samples_per_proposal &&
         a.iterations == b.iterations && same_vec(a.box_low, b.box_low) && same_vec(a.box_high, b.box_high) &&
         a.init_sigma == b.init_sigma && a.init_cov_mode == b.init_cov_mode && a.precondition == b.precondition &&
         a.fixed_step == b.fixed_step && ra.schedule == rb.schedule && ra.strength == rb.strength &&
         ra.beta == rb.beta && ra.attenuation == rb.attenuation && ra.masses == rb.masses &&
         ra.distance_floor == rb.distance_floor && ra.zero_last_iteration == rb.zero_last_iteration &&
         a.backtrack.enabled == b.backtrack.enabled && a.backtrack.max_halvings == b.backtrack.max_halvings &&
         a.backtrack.initial_step == b.backtrack.initial_step;
}

}  // namespace

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  const bool sweeps = a.sweep.has_value() == b.sweep.has_value() &&
                      (!a.sweep || (a.sweep->axis == b.sweep->axis && a.sweep->values == b.sweep->values));
  const bool grids = a.grid.has_value() == b.grid.has_value() &&
                     (!a.grid || (same_vec(a.grid->low, b.grid->low) && same_vec(a.grid->high, b.grid->high) &&
                                  a.grid->points == b.grid->points));
  const auto& va = a.verify;
  const auto& vb = b.verify;
  return a.name == b.name && same_target(a.target, b.target) && same_gramis(a.gramis, b.gramis) &&
         a.runs == b.runs && a.base_seed == b.base_seed && a.window == b.window && a.moments == b.moments &&
         a.metrics.z == b.metrics.z && a.metrics.mean == b.metrics.mean &&
         a.metrics.second_moment == b.metrics.second_moment && a.metrics.chi2 == b.metrics.chi2 &&
         a.chi2_samples == b.chi2_samples && va.z == vb.z && va.mean == vb.mean &&
         va.second_moment == vb.second_moment && va.mse_mean == vb.mse_mean && va.chi2 == vb.chi2 && sweeps &&
         grids;
}

// ---------------------------------------------------------------------------
// Builtins

namespace {

GramisConfig base_gramis(const Vec& low, const Vec& high) {
  GramisConfig g;
  g.num_proposals = 50;
  g.samples_per_proposal = 20;
  g.iterations = 20;
  g.box_low = low;
  g.box_high = high;
  g.init_sigma = 1.0;
  return g;
}

ExperimentConfig toy_config(bool repulsion) {
  ExperimentConfig cfg;
  cfg.name = repulsion ? "toy-2comp" : "toy-2comp-norep";
  cfg.target = toy_target_spec();
  cfg.gramis = base_gramis(v2(1, 1), v2(6, 6));
  if (repulsion) {
    cfg.gramis.repulsion.schedule = ScheduleKind::Exponential;
    cfg.gramis.repulsion.strength = 0.5;
  }
  cfg.runs = 100;
  return cfg;
}

std::string sigma_tag(double sigma) {
  std::ostringstream s;
  s << sigma;
  return s.str();
}

ExperimentConfig gm5_config(bool precondition, bool repulsion, double sigma) {
  ExperimentConfig cfg;
  cfg.name = std::string("gm5-") + (precondition ? "precond" : "noprecond") + "-" + (repulsion ? "rep" : "norep") +
             "-s" + sigma_tag(sigma);
  cfg.target = gm5_target_spec();
  cfg.gramis = base_gramis(v2(-15, -15), v2(15, 15));
  cfg.gramis.init_sigma = sigma;
  cfg.gramis.precondition = precondition;
  cfg.gramis.fixed_step = 0.1;
  if (repulsion) {
    cfg.gramis.repulsion.schedule = ScheduleKind::Exponential;
    cfg.gramis.repulsion.strength = 0.05;
  }
  if (precondition && repulsion && sigma == 1.0) {
    cfg.verify.z = 0.05;
    cfg.verify.mean = 2.0;
  }
  return cfg;
}

std::string eta_tag(double eta) {
  std::ostringstream s;
  s << eta;
  return s.str();
}

ExperimentConfig gg5_config(double eta) {
  ExperimentConfig cfg;
  cfg.name = "gg5-eta" + eta_tag(eta);
  cfg.target = gg5_target_spec(eta);
  cfg.gramis = base_gramis(v2(13, -8), v2(15, -6));
  cfg.gramis.repulsion.schedule = ScheduleKind::Exponential;
  cfg.gramis.repulsion.strength = 1.0;
  cfg.metrics.chi2 = true;
  if (eta == 1.0) {
    cfg.verify.z = 1e-2;
    cfg.verify.chi2 = 0.5;
  }
  return cfg;
}

ExperimentConfig banana_config(long dim, double g_rep) {
  ExperimentConfig cfg;
  cfg.target = banana_target_spec(dim);
  cfg.gramis = base_gramis(Vec::Constant(dim, -4.0), Vec::Constant(dim, 4.0));
  if (g_rep > 0.0) {
    cfg.gramis.repulsion.schedule = ScheduleKind::Constant;
    cfg.gramis.repulsion.strength = g_rep;
  }
  cfg.runs = 50;
  cfg.metrics.z = false;
  cfg.metrics.second_moment = false;
  return cfg;
}

}  // namespace

std::vector<BuiltinInfo> list_builtins() {
  return {
      {"toy-2comp", "2-component Gaussian mixture, exponential repulsion G1=0.5"},
      {"toy-2comp-norep", "2-component Gaussian mixture, no repulsion"},
      {"gm5-ablation", "5-component Gaussian mixture, precondition x repulsion ablation for sigma in {1,3,5}"},
      {"gg5", "5-component generalized Gaussian mixture, eta in {0.5,1,1.5}, G1=1 exponential"},
      {"banana-dim-sweep", "banana target, no repulsion, dimension sweep 2..50"},
      {"banana-iter-sweep", "2-D banana target, iteration sweep T in 10..200 with constant G in {0, 0.01}"},
  };
}

std::vector<ExperimentConfig> builtin_configs(const std::string& name) {
  if (name == "toy-2comp") return {toy_config(true)};
  if (name == "toy-2comp-norep") return {toy_config(false)};
  if (name == "gm5-ablation") {
    std::vector<ExperimentConfig> out;
    for (double sigma : {1.0, 3.0, 5.0}) {
      for (bool pre : {false, true}) {
        for (bool rep : {false, true}) out.push_back(gm5_config(pre, rep, sigma));
      }
    }
    return out;
  }
  if (name == "gg5") return {gg5_config(0.5), gg5_config(1.0), gg5_config(1.5)};
  if (name == "banana-dim-sweep") {
    ExperimentConfig cfg = banana_config(5, 0.0);
    cfg.name = "banana-dim-sweep";
    cfg.sweep = SweepSpec{SweepAxis::Dimension, {2, 5, 10, 15, 20, 30, 40, 50}};
    return {cfg};
  }
  if (name == "banana-iter-sweep") {
    std::vector<ExperimentConfig> out;
    for (double g : {0.0, 1e-2}) {
      ExperimentConfig cfg = banana_config(2, g);
      cfg.name = g > 0.0 ? "banana-iter-sweep-g0.01" : "banana-iter-sweep-g0";
      cfg.sweep = SweepSpec{SweepAxis::Iterations, {10, 20, 50, 100, 150, 200}};
      out.push_back(std::move(cfg));
    }
    return out;
  }
  throw ConfigError("unknown builtin '" + name + "'");
}

// ---------------------------------------------------------------------------
// Output files

namespace {

void write_run_csv(const RunResult& run, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  const long d = run.final_bank.dim();
  out << "t,n,k";
  for (long i = 1; i <= d; ++i) out << ",x" << i;
  out << ",log_w\n";
  for (const auto& rec : run.records) {
    for (long s = 0; s < rec.samples.size(); ++s) {
      const auto idx = static_cast<std::size_t>(s);
      out << rec.t << ',' << rec.samples.proposal[idx] << ',' << rec.samples.draw[idx];
      for (long i = 0; i < d; ++i) out << ',' << format_double(rec.samples.points(i, s));
      out << ',' << format_double(rec.log_weights[idx]) << '\n';
    }
  }
}

void write_trace_csv(const RunResult& run, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  const long d = run.final_bank.dim();
  out << "t,n";
  for (long i = 1; i <= d; ++i) out << ",mu" << i;
  for (long r = 1; r <= d; ++r) {
    for (long c = r; c <= d; ++c) out << ",s" << r << '_' << c;
  }
  out << '\n';
  for (const auto& rec : run.records) {
    for (std::size_t n = 0; n < rec.means.size(); ++n) {
      out << rec.t << ',' << n;
      for (long i = 0; i < d; ++i) out << ',' << format_double(rec.means[n][i]);
      for (long r = 0; r < d; ++r) {
        for (long c = r; c < d; ++c) out << ',' << format_double(rec.covariances[n](r, c));
      }
      out << '\n';
    }
  }
}

nlohmann::json optional_json(const std::optional<double>& v) {
  if (!v || std::isnan(*v)) return nullptr;
  if (std::isinf(*v)) return "inf";
  return *v;
}

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json out = nlohmann::json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(optional_json(v[i]));
  return out;
}

GroundTruth scored_truth(const ExperimentConfig& cfg, const TargetDensity& target) {
  GroundTruth truth = target.truth();
  if (!cfg.metrics.z) truth.normalizing_constant.reset();
  if (!cfg.metrics.mean) truth.mean.reset();
  if (!cfg.metrics.second_moment) truth.second_moment.reset();
  return truth;
}

}  // namespace

GridSpec default_grid(const TargetSpec& spec) {
  GridSpec g;
  if (spec.family == TargetFamily::Banana) {
    g.low = v2(-4.0 * spec.c, -4.0 - spec.b * 8.0 * spec.c * spec.c);
    g.high = v2(4.0 * spec.c, 4.0 + spec.b * spec.c * spec.c);
    return g;
  }
  g.low = spec.means.front();
  g.high = spec.means.front();
  for (std::size_t l = 0; l < spec.means.size(); ++l) {
    const Vec spread = 4.0 * spec.matrices[l].diagonal().cwiseSqrt();
    g.low = g.low.cwiseMin(spec.means[l] - spread);
    g.high = g.high.cwiseMax(spec.means[l] + spread);
  }
  return g;
}

void write_grid(const TargetDensity& target, const GridSpec& grid, const fs::path& path) {
  require_same_dim(2, target.dim(), "write_grid");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "x1,x2,log_density\n";
  const int m = grid.points;
  Vec x(2);
  for (int i = 0; i < m; ++i) {
    x[0] = grid.low[0] + (grid.high[0] - grid.low[0]) * i / (m - 1);
    for (int j = 0; j < m; ++j) {
      x[1] = grid.low[1] + (grid.high[1] - grid.low[1]) * j / (m - 1);
      out << format_double(x[0]) << ',' << format_double(x[1]) << ',' << format_double(target.log_density(x))
          << '\n';
    }
  }
}

void write_summary(const ExperimentResult& result, const fs::path& path) {
  using nlohmann::json;
  json j;
  j["config"] = json::parse(config_to_json(result.config));
  const RmseTable& t = result.table;
  j["rmse"] = {{"z", optional_json(t.z)},
               {"mean", optional_json(t.mean)},
               {"second_moment", optional_json(t.second_moment)},
               {"mse_mean", optional_json(t.mse_mean)},
               {"chi2_mean", optional_json(t.chi2_mean)}};
  j["quick"] = result.quick;
  j["runs_executed"] = result.runs.size();
  j["runs_used"] = t.runs_used;
  j["runs_failed"] = t.runs_failed;
  json runs = json::array();
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    const auto& o = result.runs[r];
    json e;
    e["run"] = r;
    e["failed"] = o.report.failed;
    if (!o.error.empty()) e["error"] = o.error;
    e["z_hat"] = optional_json(o.report.z_hat);
    e["snis_mean"] = vec_json(o.report.snis_mean);
    e["snis_second_moment"] = vec_json(o.report.snis_second_moment);
    if (o.report.uis_mean) e["uis_mean"] = vec_json(*o.report.uis_mean);
    if (o.report.chi2) e["chi2"] = optional_json(*o.report.chi2);
    e["window"] = {o.report.window_first, o.report.window_last};
    e["seconds"] = o.seconds;
    runs.push_back(std::move(e));
  }
  j["runs"] = std::move(runs);
  j["seconds"] = result.seconds;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Running

double quick_tolerance_factor(const ExperimentConfig& cfg) {
  return std::max(1.0, std::sqrt(static_cast<double>(cfg.runs) / kQuickRuns));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg_in, const RunOptions& opts) {
  ExperimentConfig cfg = cfg_in;
  if (opts.seed) cfg.base_seed = *opts.seed;
  cfg.validate();
  const int runs = opts.quick ? std::min(cfg.runs, kQuickRuns) : cfg.runs;
  const auto target = make_target(cfg.target);
  const std::optional<double> known_z = target->truth().normalizing_constant;
  const bool want_chi2 = cfg.metrics.chi2 && known_z.has_value();
  if (opts.out) fs::create_directories(*opts.out);

  ExperimentResult result;
  result.config = cfg;
  result.quick = opts.quick;
  result.runs.resize(static_cast<std::size_t>(runs));
  const auto start = std::chrono::steady_clock::now();

  std::atomic<int> next{0};
  std::mutex io_error_mutex;
  std::string io_error;
  auto worker = [&]() {
    for (int r = next++; r < runs; r = next++) {
      RunOutcome& outcome = result.runs[static_cast<std::size_t>(r)];
      const auto t0 = std::chrono::steady_clock::now();
      const RngStream stream(cfg.base_seed, static_cast<std::uint64_t>(r));
      try {
        RunResult run = run_gramis(*target, cfg.gramis, stream);
        const WeightedSampleSet all = collect_samples(run.records);
        outcome.report = make_report(window_select(all, cfg.window), known_z);
        outcome.final_means = run.final_bank.means();
        if (want_chi2 && !outcome.report.failed) {
          RngStream chi_rng = stream.split(1ULL << 40);
          outcome.report.chi2 = chi2_estimate(*target, run.final_bank, cfg.chi2_samples, chi_rng).value;
        }
        if (opts.out && opts.trace) {
          write_run_csv(run, *opts.out / ("run_" + std::to_string(r) + ".csv"));
          write_trace_csv(run, *opts.out / ("trace_" + std::to_string(r) + ".csv"));
        }
      } catch (const ConfigError& e) {
        std::lock_guard<std::mutex> lock(io_error_mutex);
        io_error = e.what();
      } catch (const std::exception& e) {
        outcome.report = failed_report(target->dim());
        outcome.error = e.what();
      }
      outcome.seconds = elapsed(t0);
    }
  };

  int threads = opts.threads > 0 ? opts.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, runs);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (!io_error.empty()) throw ConfigError(io_error);

  std::vector<EstimateReport> reports;
  reports.reserve(result.runs.size());
  for (const auto& o : result.runs) reports.push_back(o.report);
  try {
    result.table = rmse_aggregate(reports, scored_truth(cfg, *target), cfg.moments);
  } catch (const MissingTruth&) {
    for (const auto& r : reports) (r.failed ? result.table.runs_failed : result.table.runs_used)++;
  }
  result.seconds = elapsed(start);

  if (opts.out) {
    write_summary(result, *opts.out / "summary.json");
    if (opts.trace && target->dim() == 2) write_grid(*target, cfg.grid ? *cfg.grid : default_grid(cfg.target), *opts.out / "grid.csv");
  }
  return result;
}

std::vector<std::string> verify_failures(const ExperimentResult& result) {
  std::vector<std::string> out;
  const auto& v = result.config.verify;
  const auto& t = result.table;
  const double factor = result.quick ? quick_tolerance_factor(result.config) : 1.0;
  auto check = [&](const char* what, const std::optional<double>& bound, const std::optional<double>& value) {
    if (!bound) return;
    const double limit = *bound * factor;
    if (!value || !(*value <= limit)) {
      out.push_back(result.config.name + ": " + what + " = " + (value ? format_double(*value) : "n/a") +
                    " exceeds " + format_double(limit));
    }
  };
  check("rmse(z)", v.z, t.z);
  check("rmse(mean)", v.mean, t.mean);
  check("rmse(second_moment)", v.second_moment, t.second_moment);
  check("mse(mean)", v.mse_mean, t.mse_mean);
  check("chi2", v.chi2, t.chi2_mean);
  if (v.any() && t.runs_used == 0) out.push_back(result.config.name + ": every run failed");
  return out;
}

ExperimentConfig apply_axis(const ExperimentConfig& cfg, SweepAxis axis, int value) {
  ExperimentConfig out = cfg;
  out.sweep.reset();
  if (axis == SweepAxis::Iterations) {
    out.gramis.iterations = value;
    out.name = cfg.name + "-T" + std::to_string(value);
    return out;
  }
  if (cfg.target.family != TargetFamily::Banana) {
    throw ConfigError("dimension sweeps are only defined for banana targets");
  }
  out.target.dim = value;
  out.gramis.box_low = Vec::Constant(value, cfg.gramis.box_low[0]);
  out.gramis.box_high = Vec::Constant(value, cfg.gramis.box_high[0]);
  out.name = cfg.name + "-d" + std::to_string(value);
  return out;
}

std::vector<SweepPoint> sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<int>& values,
                              const RunOptions& opts) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepPoint> points;
  for (int v : values) {
    RunOptions sub = opts;
    const ExperimentConfig point_cfg = apply_axis(cfg, axis, v);
    if (opts.out) sub.out = *opts.out / point_cfg.name;
    points.push_back({v, run_experiment(point_cfg, sub)});
  }
  if (opts.out) write_sweep_table(points, axis, *opts.out / "sweep.csv");
  return points;
}

void write_sweep_table(const std::vector<SweepPoint>& points, SweepAxis axis, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("nan"); };
  out << (axis == SweepAxis::Dimension ? "dimension" : "iterations")
      << ",rmse_z,rmse_mean,rmse_second_moment,mse_mean,chi2_mean,runs_used,runs_failed\n";
  for (const auto& p : points) {
    const auto& t = p.result.table;
    out << p.value << ',' << cell(t.z) << ',' << cell(t.mean) << ',' << cell(t.second_moment) << ','
        << cell(t.mse_mean) << ',' << cell(t.chi2_mean) << ',' << t.runs_used << ',' << t.runs_failed << '\n';
  }
}

// ---------------------------------------------------------------------------
// Gradient checks

namespace {

Vec random_point(const TargetSpec& spec, RngStream& rng) {
  if (spec.family == TargetFamily::Banana) {
    Vec x(spec.dim);
    for (long i = 0; i < x.size(); ++i) x[i] = rng.uniform(-3.0, 3.0);
    return x;
  }
  const std::size_t l = rng.index(spec.means.size());
  const SpdFactor f = spd_factorize(spec.matrices[l]);
  return spec.means[l] + 1.5 * f.apply_lower(rng.normal_vector(spec.dimension()));
}

bool near_nonsmooth_mean(const TargetSpec& spec, const Vec& x) {
  if (spec.family != TargetFamily::GGMixture) return false;
  for (std::size_t l = 0; l < spec.means.size(); ++l) {
    if (spec.shapes[l] < 1.0 && (x - spec.means[l]).norm() < 1e-3) return true;
  }
  return false;
}

double relative_error(double diff_norm, double ref_norm) { return diff_norm / std::max(1.0, ref_norm); }

}  // namespace

GradientCheckReport check_gradients(const TargetSpec& spec, int points, std::uint64_t seed) {
  if (points < 1) throw InvalidParameter("check_gradients: need at least one point");
  const auto start = std::chrono::steady_clock::now();
  const auto target = make_target(spec);
  const long d = target->dim();
  RngStream rng(seed, 0);

  GradientCheckReport report;
  report.target = target->name();
  report.points = points;
  for (int p = 0; p < points; ++p) {
    Vec x = random_point(spec, rng);
    while (near_nonsmooth_mean(spec, x)) x = random_point(spec, rng);

    const TargetEval eval = target->evaluate(x);
    Vec fd_grad(d);
    Mat fd_hess(d, d);
    for (long i = 0; i < d; ++i) {
      const double h = 1e-5 * (1.0 + std::abs(x[i]));
      Vec xp = x;
      Vec xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double step = xp[i] - xm[i];
      fd_grad[i] = (target->log_density(xp) - target->log_density(xm)) / step;
      fd_hess.col(i) = (target->grad_log_density(xp) - target->grad_log_density(xm)) / step;
    }
    report.max_grad_error =
        std::max(report.max_grad_error, relative_error((eval.grad - fd_grad).norm(), fd_grad.norm()));
    report.max_hessian_error =
        std::max(report.max_hessian_error, relative_error((eval.hessian - fd_hess).norm(), fd_hess.norm()));
  }
  report.seconds = elapsed(start);
  return report;
}

}  // namespace gramis
