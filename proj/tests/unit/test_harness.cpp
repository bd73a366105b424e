#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gramis/harness.hpp"

using namespace gramis;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gramis_test_" + name);
  fs::remove_all(dir);
  return dir;
}

/// A cheap toy config so that harness tests stay fast.
ExperimentConfig small_toy() {
  ExperimentConfig cfg = builtin_configs("toy-2comp").front();
  cfg.runs = 4;
  cfg.gramis.num_proposals = 10;
  cfg.gramis.samples_per_proposal = 5;
  cfg.gramis.iterations = 6;
  return cfg;
}

}  // namespace

TEST_CASE("every builtin config survives a json round trip") {
  const fs::path dir = scratch_dir("roundtrip");
  fs::create_directories(dir);
  int count = 0;
  for (const auto& info : list_builtins()) {
    for (const auto& cfg : builtin_configs(info.name)) {
      CAPTURE(cfg.name);
      CHECK_NOTHROW(cfg.validate());
      CHECK(config_from_json(config_to_json(cfg)) == cfg);
      const fs::path file = dir / (cfg.name + ".json");
      save_config(cfg, file);
      CHECK(load_config(file) == cfg);
      ++count;
    }
  }
  // toy ×2, gm5 ablation ×12, gg ×3, banana dimension sweep, banana iteration sweep ×2.
  CHECK(count == 20);
  fs::remove_all(dir);
}

TEST_CASE("builtin contents") {
  const auto toy = builtin_configs("toy-2comp").front();
  CHECK(toy.gramis.num_proposals == 50);
  CHECK(toy.gramis.samples_per_proposal == 20);
  CHECK(toy.gramis.iterations == 20);
  CHECK(toy.runs == 100);
  CHECK(toy.gramis.repulsion.schedule == ScheduleKind::Exponential);
  CHECK(builtin_configs("toy-2comp-norep").front().gramis.repulsion.schedule == ScheduleKind::Off);
  CHECK(builtin_configs("gm5-ablation").size() == 12);
  const auto dims = builtin_configs("banana-dim-sweep").front();
  REQUIRE(dims.sweep.has_value());
  CHECK(dims.sweep->values == std::vector<int>{2, 5, 10, 15, 20, 30, 40, 50});
  CHECK_THROWS_AS(builtin_configs("nope"), ConfigError);
}

TEST_CASE("malformed configs are rejected") {
  CHECK_THROWS_AS(config_from_json("{"), ConfigError);
  CHECK_THROWS_AS(config_from_json("[]"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/dir/config.json"), ConfigError);

  auto text = config_to_json(small_toy());
  auto replace = [&](const std::string& from, const std::string& to) {
    std::string s = text;
    const auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    s.replace(pos, from.size(), to);
    return s;
  };
  CHECK_THROWS_AS(config_from_json(replace("\"gaussian_mixture\"", "\"cauchy\"")), ConfigError);
  CHECK_THROWS_AS(config_from_json(replace("\"last_half\"", "\"middle\"")), ConfigError);

  ExperimentConfig bad = small_toy();
  bad.runs = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = small_toy();
  bad.gramis.box_low = Vec::Zero(3);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = small_toy();
  bad.sweep = SweepSpec{SweepAxis::Dimension, {2, 3}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("target names") {
  CHECK(parse_target_name("toy").means.size() == 2);
  CHECK(parse_target_name("gm5").means.size() == 5);
  const auto gg = parse_target_name("gg:0.5");
  CHECK(gg.family == TargetFamily::GGMixture);
  CHECK(gg.shapes == std::vector<double>(5, 0.5));
  CHECK(parse_target_name("gg:1.5:0").smoothing == 0.0);
  const auto ban = parse_target_name("banana:7:2:0.5");
  CHECK(ban.family == TargetFamily::Banana);
  CHECK(ban.dimension() == 7);
  CHECK(ban.b == 2.0);
  CHECK(ban.c == 0.5);
  CHECK_THROWS_AS(parse_target_name("banana"), ConfigError);
  CHECK_THROWS_AS(parse_target_name("gg:x"), ConfigError);
  CHECK_THROWS_AS(parse_target_name("rosenbrock"), ConfigError);
}

TEST_CASE("runs are deterministic down to the output bytes") {
  const ExperimentConfig cfg = small_toy();
  RunOptions opts;
  opts.trace = true;
  opts.threads = 2;
  const fs::path a = scratch_dir("det_a");
  const fs::path b = scratch_dir("det_b");
  opts.out = a;
  run_experiment(cfg, opts);
  opts.out = b;
  opts.threads = 1;
  run_experiment(cfg, opts);
  for (const char* f : {"run_0.csv", "run_3.csv", "trace_0.csv", "trace_3.csv", "grid.csv"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(fs::exists(a / "summary.json"));
  CHECK_FALSE(fs::exists(a / "run_4.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("traces are only written on request") {
  RunOptions opts;
  opts.out = scratch_dir("notrace");
  run_experiment(small_toy(), opts);
  CHECK(fs::exists(*opts.out / "summary.json"));
  CHECK_FALSE(fs::exists(*opts.out / "run_0.csv"));
  CHECK_FALSE(fs::exists(*opts.out / "grid.csv"));
  fs::remove_all(*opts.out);
}

TEST_CASE("aggregates depend on the seed but not on the thread count") {
  const ExperimentConfig cfg = small_toy();
  RunOptions one;
  one.threads = 1;
  RunOptions three;
  three.threads = 3;
  const auto r1 = run_experiment(cfg, one);
  const auto r3 = run_experiment(cfg, three);
  CHECK(*r1.table.z == *r3.table.z);
  CHECK(*r1.table.mean == *r3.table.mean);
  CHECK(*r1.table.second_moment == *r3.table.second_moment);

  RunOptions other = one;
  other.seed = 12345;
  const auto rs = run_experiment(cfg, other);
  CHECK(rs.config.base_seed == 12345);
  CHECK(*rs.table.z != *r1.table.z);
}

TEST_CASE("quick mode caps the number of runs") {
  ExperimentConfig cfg = small_toy();
  cfg.runs = 80;
  cfg.gramis.iterations = 2;
  RunOptions opts;
  opts.quick = true;
  const auto r = run_experiment(cfg, opts);
  CHECK(r.runs.size() == static_cast<std::size_t>(kQuickRuns));
  CHECK(r.config.runs == 80);
  CHECK(quick_tolerance_factor(r.config) == doctest::Approx(2.0));
  cfg.runs = 5;
  CHECK(quick_tolerance_factor(cfg) == 1.0);
}

TEST_CASE("verify thresholds") {
  ExperimentResult r;
  r.config = small_toy();
  r.config.runs = 80;
  r.config.verify.z = 0.1;
  r.config.verify.mean = 1.0;
  r.table.z = 0.15;
  r.table.mean = 0.5;
  r.table.runs_used = 80;
  CHECK(verify_failures(r).size() == 1);
  r.quick = true;
  CHECK(verify_failures(r).empty());
  r.table.mean.reset();
  CHECK(verify_failures(r).size() == 1);
  r.config.verify = {};
  CHECK(verify_failures(r).empty());
}

TEST_CASE("a single-value sweep equals a direct run") {
  const ExperimentConfig cfg = small_toy();
  RunOptions opts;
  opts.threads = 1;
  const auto points = sweep(cfg, SweepAxis::Iterations, {4}, opts);
  REQUIRE(points.size() == 1);
  const ExperimentConfig direct_cfg = apply_axis(cfg, SweepAxis::Iterations, 4);
  CHECK(direct_cfg.gramis.iterations == 4);
  const auto direct = run_experiment(direct_cfg, opts);
  CHECK(*points[0].result.table.z == *direct.table.z);
  CHECK(*points[0].result.table.mean == *direct.table.mean);

  CHECK_THROWS_AS(apply_axis(cfg, SweepAxis::Dimension, 5), ConfigError);
  ExperimentConfig ban = builtin_configs("banana-dim-sweep").front();
  const ExperimentConfig d7 = apply_axis(ban, SweepAxis::Dimension, 7);
  CHECK(d7.target.dimension() == 7);
  CHECK(d7.gramis.box_low.size() == 7);
  CHECK(d7.gramis.box_high.size() == 7);
  CHECK_NOTHROW(d7.validate());
}

TEST_CASE("summary json is machine readable") {
  RunOptions opts;
  opts.out = scratch_dir("summary");
  run_experiment(small_toy(), opts);
  const std::string text = slurp(*opts.out / "summary.json");
  CHECK(text.find("\"rmse\"") != std::string::npos);
  CHECK(text.find(small_toy().name) != std::string::npos);
  fs::remove_all(*opts.out);
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("gradient checks on the named targets") {
  CHECK(check_gradients(parse_target_name("gm5"), 100, 1).passed());
  CHECK(check_gradients(parse_target_name("gg:0.5"), 100, 2).passed());
  const auto t0 = std::chrono::steady_clock::now();
  const auto ban = check_gradients(parse_target_name("banana:50"), 100, 3);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(ban.passed());
  CHECK(ban.points == 100);
  CHECK(secs < 5.0);
}
