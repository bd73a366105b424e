#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gramis/harness.hpp"

namespace gramis {

using nlohmann::json;

namespace {

json vec_to_json(const Vec& v) {
  json out = json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json mat_to_json(const Mat& m) {
  json out = json::array();
  for (long r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Vec vec_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + ": expected an array of numbers");
  Vec v(static_cast<long>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<long>(i)] = j[i].get<double>();
  return v;
}

/// Accepts either an array or a scalar broadcast to `dim` entries.
Vec box_from_json(const json& j, long dim, const char* what) {
  if (j.is_number()) return Vec::Constant(dim, j.get<double>());
  return vec_from_json(j, what);
}

Mat mat_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw ConfigError(std::string(what) + ": expected a non-empty matrix");
  const auto rows = static_cast<long>(j.size());
  const auto cols = static_cast<long>(j[0].size());
  Mat m(rows, cols);
  for (long r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<long>(row.size()) != cols) {
      throw ConfigError(std::string(what) + ": ragged matrix");
    }
    for (long c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

const char* family_name(TargetFamily f) {
  switch (f) {
    case TargetFamily::GaussianMixture:
      return "gaussian_mixture";
    case TargetFamily::GGMixture:
      return "gg_mixture";
    case TargetFamily::Banana:
      return "banana";
  }
  return "";
}

TargetFamily family_from(const std::string& s) {
  if (s == "gaussian_mixture") return TargetFamily::GaussianMixture;
  if (s == "gg_mixture") return TargetFamily::GGMixture;
  if (s == "banana") return TargetFamily::Banana;
  throw ConfigError("unknown target family '" + s + "'");
}

const char* schedule_name(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Off:
      return "off";
    case ScheduleKind::Constant:
      return "constant";
    case ScheduleKind::Exponential:
      return "exponential";
  }
  return "";
}

ScheduleKind schedule_from(const std::string& s) {
  if (s == "off") return ScheduleKind::Off;
  if (s == "constant") return ScheduleKind::Constant;
  if (s == "exponential") return ScheduleKind::Exponential;
  throw ConfigError("unknown repulsion schedule '" + s + "'");
}

const char* axis_name(SweepAxis a) { return a == SweepAxis::Dimension ? "dimension" : "iterations"; }

SweepAxis axis_from(const std::string& s) {
  if (s == "dimension") return SweepAxis::Dimension;
  if (s == "iterations") return SweepAxis::Iterations;
  throw ConfigError("unknown sweep axis '" + s + "'");
}

json target_to_json(const TargetSpec& t) {
  json j;
  j["family"] = family_name(t.family);
  if (t.family == TargetFamily::Banana) {
    j["dim"] = t.dim;
    j["b"] = t.b;
    j["c"] = t.c;
    return j;
  }
  j["weights"] = t.weights;
  json means = json::array();
  for (const auto& m : t.means) means.push_back(vec_to_json(m));
  j["means"] = std::move(means);
  json mats = json::array();
  for (const auto& m : t.matrices) mats.push_back(mat_to_json(m));
  if (t.family == TargetFamily::GaussianMixture) {
    j["covariances"] = std::move(mats);
  } else {
    j["scales"] = std::move(mats);
    j["shapes"] = t.shapes;
    j["smoothing"] = t.smoothing;
  }
  return j;
}

TargetSpec target_from_json(const json& j) {
  TargetSpec t;
  t.family = family_from(j.at("family").get<std::string>());
  if (t.family == TargetFamily::Banana) {
    t.dim = j.at("dim").get<long>();
    t.b = j.value("b", 3.0);
    t.c = j.value("c", 1.0);
    return t;
  }
  t.weights = j.at("weights").get<std::vector<double>>();
  for (const auto& m : j.at("means")) t.means.push_back(vec_from_json(m, "target.means"));
  const char* key = t.family == TargetFamily::GaussianMixture ? "covariances" : "scales";
  for (const auto& m : j.at(key)) t.matrices.push_back(mat_from_json(m, key));
  if (t.family == TargetFamily::GGMixture) {
    t.shapes = j.at("shapes").get<std::vector<double>>();
    t.smoothing = j.value("smoothing", GGMixtureTarget::kDefaultSmoothing);
  }
  if (!t.means.empty()) t.dim = t.means.front().size();
  return t;
}

json gramis_to_json(const GramisConfig& g) {
  json j;
  j["N"] = g.num_proposals;
  j["K"] = g.samples_per_proposal;
  j["T"] = g.iterations;
  j["box_low"] = vec_to_json(g.box_low);
  j["box_high"] = vec_to_json(g.box_high);
  j["init_sigma"] = g.init_sigma;
  j["init_cov_mode"] = g.init_cov_mode == InitCovMode::Hessian ? "hessian" : "isotropic";
  j["precondition"] = g.precondition;
  j["fixed_step"] = g.fixed_step;

  json rep;
  rep["schedule"] = schedule_name(g.repulsion.schedule);
  rep["strength"] = g.repulsion.strength;
  if (g.repulsion.beta) rep["beta"] = *g.repulsion.beta;
  rep["attenuation"] = g.repulsion.attenuation;
  if (!g.repulsion.masses.empty()) rep["masses"] = g.repulsion.masses;
  rep["distance_floor"] = g.repulsion.distance_floor;
  rep["zero_last_iteration"] = g.repulsion.zero_last_iteration;
  j["repulsion"] = std::move(rep);

  json bt;
  bt["enabled"] = g.backtrack.enabled;
  bt["max_halvings"] = g.backtrack.max_halvings;
  bt["initial_step"] = g.backtrack.initial_step;
  j["backtrack"] = std::move(bt);
  return j;
}

GramisConfig gramis_from_json(const json& j, long dim) {
  GramisConfig g;
  g.num_proposals = j.value("N", g.num_proposals);
  g.samples_per_proposal = j.value("K", g.samples_per_proposal);
  g.iterations = j.value("T", g.iterations);
  g.box_low = box_from_json(j.at("box_low"), dim, "gramis.box_low");
  g.box_high = box_from_json(j.at("box_high"), dim, "gramis.box_high");
  g.init_sigma = j.value("init_sigma", g.init_sigma);
  const std::string mode = j.value("init_cov_mode", std::string("isotropic"));
  if (mode == "hessian") {
    g.init_cov_mode = InitCovMode::Hessian;
  } else if (mode != "isotropic") {
    throw ConfigError("unknown init_cov_mode '" + mode + "'");
  }
  g.precondition = j.value("precondition", g.precondition);
  g.fixed_step = j.value("fixed_step", g.fixed_step);
  if (j.contains("repulsion")) {
    const json& r = j["repulsion"];
    g.repulsion.schedule = schedule_from(r.value("schedule", std::string("off")));
    g.repulsion.strength = r.value("strength", 0.0);
    if (r.contains("beta")) g.repulsion.beta = r["beta"].get<double>();
    g.repulsion.attenuation = r.value("attenuation", g.repulsion.attenuation);
    if (r.contains("masses")) g.repulsion.masses = r["masses"].get<std::vector<double>>();
    g.repulsion.distance_floor = r.value("distance_floor", g.repulsion.distance_floor);
    g.repulsion.zero_last_iteration = r.value("zero_last_iteration", false);
  }
  if (j.contains("backtrack")) {
    const json& b = j["backtrack"];
    g.backtrack.enabled = b.value("enabled", g.backtrack.enabled);
    g.backtrack.max_halvings = b.value("max_halvings", g.backtrack.max_halvings);
    g.backtrack.initial_step = b.value("initial_step", g.backtrack.initial_step);
  }
  return g;
}

void put_optional(json& j, const char* key, const std::optional<double>& v) {
  if (v) j[key] = *v;
}

std::optional<double> get_optional(const json& j, const char* key) {
  if (j.contains(key) && !j[key].is_null()) return j[key].get<double>();
  return std::nullopt;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["target"] = target_to_json(cfg.target);
  j["gramis"] = gramis_to_json(cfg.gramis);
  j["runs"] = cfg.runs;
  j["base_seed"] = cfg.base_seed;
  j["window"] = cfg.window == WindowPolicy::All ? "all" : "last_half";
  j["moments"] = cfg.moments == MomentEstimator::Uis ? "uis" : "snis";
  j["metrics"] = {{"z", cfg.metrics.z},
                  {"mean", cfg.metrics.mean},
                  {"second_moment", cfg.metrics.second_moment},
                  {"chi2", cfg.metrics.chi2}};
  j["chi2_samples"] = cfg.chi2_samples;
  json verify = json::object();
  put_optional(verify, "z", cfg.verify.z);
  put_optional(verify, "mean", cfg.verify.mean);
  put_optional(verify, "second_moment", cfg.verify.second_moment);
  put_optional(verify, "mse_mean", cfg.verify.mse_mean);
  put_optional(verify, "chi2", cfg.verify.chi2);
  j["verify"] = std::move(verify);
  if (cfg.sweep) j["sweep"] = {{"axis", axis_name(cfg.sweep->axis)}, {"values", cfg.sweep->values}};
  if (cfg.grid) {
    j["grid"] = {{"low", vec_to_json(cfg.grid->low)}, {"high", vec_to_json(cfg.grid->high)}, {"points", cfg.grid->points}};
  }
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    ExperimentConfig cfg;
    cfg.name = j.value("name", cfg.name);
    cfg.target = target_from_json(j.at("target"));
    cfg.gramis = gramis_from_json(j.at("gramis"), cfg.target.dimension());
    cfg.runs = j.value("runs", cfg.runs);
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
    const std::string window = j.value("window", std::string("last_half"));
    if (window == "all") {
      cfg.window = WindowPolicy::All;
    } else if (window != "last_half") {
      throw ConfigError("unknown window '" + window + "'");
    }
    const std::string moments = j.value("moments", std::string("snis"));
    if (moments == "uis") {
      cfg.moments = MomentEstimator::Uis;
    } else if (moments != "snis") {
      throw ConfigError("unknown moment estimator '" + moments + "'");
    }
    if (j.contains("metrics")) {
      const json& m = j["metrics"];
      cfg.metrics.z = m.value("z", cfg.metrics.z);
      cfg.metrics.mean = m.value("mean", cfg.metrics.mean);
      cfg.metrics.second_moment = m.value("second_moment", cfg.metrics.second_moment);
      cfg.metrics.chi2 = m.value("chi2", cfg.metrics.chi2);
    }
    cfg.chi2_samples = j.value("chi2_samples", cfg.chi2_samples);
    if (j.contains("verify")) {
      const json& v = j["verify"];
      cfg.verify.z = get_optional(v, "z");
      cfg.verify.mean = get_optional(v, "mean");
      cfg.verify.second_moment = get_optional(v, "second_moment");
      cfg.verify.mse_mean = get_optional(v, "mse_mean");
      cfg.verify.chi2 = get_optional(v, "chi2");
    }
    if (j.contains("sweep")) {
      SweepSpec s;
      s.axis = axis_from(j["sweep"].at("axis").get<std::string>());
      s.values = j["sweep"].at("values").get<std::vector<int>>();
      cfg.sweep = std::move(s);
    }
    if (j.contains("grid")) {
      GridSpec g;
      g.low = vec_from_json(j["grid"].at("low"), "grid.low");
      g.high = vec_from_json(j["grid"].at("high"), "grid.high");
      g.points = j["grid"].value("points", g.points);
      cfg.grid = std::move(g);
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path.string());
  out << config_to_json(cfg) << '\n';
}

}  // namespace gramis
