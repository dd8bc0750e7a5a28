#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "deadtime/experiment.hpp"

using namespace deadtime;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ExperimentConfig small_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.s_values = {3.16};
  cfg.b_values = {0.562};
  cfg.timing.t_r = 100.0;
  cfg.timing.t_d = 75.0;
  cfg.timing.sigma = 2.0;
  cfg.timing.t_bin = 0.5;
  cfg.n_r_values = {500, 2000};
  cfg.trials = 4;
  cfg.base_seed = 5;
  cfg.methods = {"LF", "HF", "SC", "MCPDF"};
  cfg.out_dir = out_dir;
  return cfg;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("config defaults are valid and derive the grid quantities") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.n_b() == 2000);
  CHECK(cfg.delay() == doctest::Approx(50.025));
  CHECK(cfg.tv_cells() == 10);
  const SceneModel m = cfg.scene(1.0, 2.0);
  CHECK(m.signal == 1.0);
  CHECK(m.background == 2.0);
  CHECK(m.tau == doctest::Approx(50.025));
  CHECK(cfg.grid().n_d == 1500);
}

TEST_CASE("json parsing accepts known keys and applies them") {
  const ExperimentConfig cfg = ExperimentConfig::from_json_text(
      R"({
        "s_values": [1.0, 2.0],
        "b_values": [0.5],
        "timing": {"t_r": 80.0, "t_d": 75.0, "sigma": 1.0, "t_bin": 0.1},
        "n_r_values": [100, 200],
        "trials": 7,
        "base_seed": 99,
        "methods": ["hf", "MCPDF"],
        "out_dir": "somewhere",
        "tau": 12.5,
        "tv_bin": 8.0,
        "lf_flux": 0.1,
        "lf_nr_scale": 5.0,
        "axis": "detections"
      })",
      "inline");
  CHECK(cfg.s_values == std::vector<double>{1.0, 2.0});
  CHECK(cfg.timing.t_r == 80.0);
  CHECK(cfg.n_b() == 800);
  CHECK(cfg.trials == 7);
  CHECK(cfg.base_seed == 99);
  REQUIRE(cfg.tau.has_value());
  CHECK(cfg.delay() == doctest::Approx(12.5));
  CHECK(cfg.tv_cells() == 10);
  CHECK(cfg.axis == "detections");
}

TEST_CASE("json parsing rejects unknown keys, bad types, and bad values") {
  CHECK_THROWS_WITH_AS(
      ExperimentConfig::from_json_text(R"({"unknown_thing": 3})", "inline"),
      doctest::Contains("unknown_thing"), ConfigError);
  CHECK_THROWS_AS(
      ExperimentConfig::from_json_text(R"({"timing": {"t_rr": 80.0}})", "inline"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"trials": "many"})", "inline"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("not json at all", "inline"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("[1,2,3]", "inline"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"trials": 0})", "inline"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"s_values": []})", "inline"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"methods": ["bogus"]})", "inline"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"axis": "sideways"})", "inline"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"tau": 100.0})", "inline"), ConfigError);
  CHECK_THROWS_AS(
      ExperimentConfig::from_json_text(R"({"timing": {"t_bin": 0.07}})", "inline"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"tv_bin": 3.0})", "inline"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_file("definitely_missing_config.json"),
                  ConfigError);
}

TEST_CASE("parallel loops cover every index once and surface exceptions") {
  std::vector<std::atomic<int>> hits(257);
  for (auto& h : hits) h = 0;
  parallel_for(257, 4, [&](int i) { hits[static_cast<std::size_t>(i)]++; });
  for (auto& h : hits) CHECK(h.load() == 1);

  CHECK_THROWS_AS(parallel_for(100, 4,
                               [](int i) {
                                 if (i == 37) throw std::invalid_argument("boom");
                               }),
                  std::invalid_argument);
}

TEST_CASE("density comparison runner writes summaries and matches the model") {
  ExperimentConfig cfg = small_config("exp_test_density");
  cfg.n_r_values = {20000};
  const std::vector<DensitySummary> rows = run_density_compare(cfg, 2);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].detections > 10000);
  CHECK(rows[0].tv_sim_pred < 0.05);
  CHECK(rows[0].tv_pred_arrival > 0.1);  // dead time visibly distorts this scene

  const std::string summary = slurp("exp_test_density/density_summary.csv");
  CHECK(summary.find("tv_sim_pred") != std::string::npos);
  CHECK(std::filesystem::exists("exp_test_density/density_S3.16_B0.562_tr100.csv"));
  std::filesystem::remove_all("exp_test_density");
}

TEST_CASE("fisher runner emits one row per flux point") {
  ExperimentConfig cfg = small_config("exp_test_fisher");
  cfg.s_values = {0.5, 3.16};
  cfg.b_values = {0.5};
  const std::vector<FisherPoint> points = run_fisher_map(cfg, 2);
  REQUIRE(points.size() == 2);
  for (const FisherPoint& p : points) {
    CHECK(p.fi_arrival > 0.0);
    CHECK(p.fi_detection > 0.0);
    CHECK(p.ratio == doctest::Approx(p.fi_detection / p.fi_arrival));
  }
  CHECK(std::filesystem::exists("exp_test_fisher/fisher_map.csv"));
  std::filesystem::remove_all("exp_test_fisher");
}

TEST_CASE("parameter estimation runner recovers the scene fluxes") {
  ExperimentConfig cfg = small_config("exp_test_params");
  cfg.s_values = {0.562};
  cfg.b_values = {0.562};
  cfg.n_r_values = {20000};
  cfg.trials = 4;
  const std::vector<ParamEstimationRow> rows = run_param_estimation(cfg, 2);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].trials == 4);
  CHECK(rows[0].b_median == doctest::Approx(0.562).epsilon(0.15));
  CHECK(rows[0].lambda_median == doctest::Approx(1.124).epsilon(0.15));
  CHECK(rows[0].s_median == doctest::Approx(0.562).epsilon(0.3));
  CHECK(std::filesystem::exists("exp_test_params/param_estimation.csv"));
  CHECK(std::filesystem::exists("exp_test_params/param_trials.csv"));
  std::filesystem::remove_all("exp_test_params");
}

TEST_CASE("mse study fills every trial slot and aggregates per axis") {
  ExperimentConfig cfg = small_config("exp_test_mse");
  const MseStudyResult by_nr = run_mse_study(cfg, MseAxis::illuminations, 2);
  REQUIRE(by_nr.trials.size() == 4u * 2u * 4u);  // methods x n_r x trials
  for (const TrialRecord& r : by_nr.trials) {
    CHECK(!r.method.empty());
    CHECK(r.detections > 0);
    CHECK(r.sq_err >= 0.0);
  }
  REQUIRE(by_nr.cells.size() == 4u * 2u);
  for (const MseCell& c : by_nr.cells) {
    CHECK(c.axis_lo == c.axis_hi);
    CHECK(c.n_trials == 4);
    CHECK(c.std_err >= 0.0);
  }
  CHECK(std::filesystem::exists("exp_test_mse/mse_illuminations.csv"));
  CHECK(std::filesystem::exists("exp_test_mse/trials_illuminations.csv"));

  const MseStudyResult by_det = run_mse_study(cfg, MseAxis::detections, 2);
  REQUIRE(!by_det.cells.empty());
  for (const MseCell& c : by_det.cells) {
    CHECK(c.axis_lo <= c.axis_value);
    CHECK(c.axis_value <= c.axis_hi);
  }
  CHECK(std::filesystem::exists("exp_test_mse/mse_detections.csv"));
  std::filesystem::remove_all("exp_test_mse");
}

TEST_CASE("repeat runs produce identical files regardless of threading") {
  ExperimentConfig cfg = small_config("exp_test_det_a");
  cfg.n_r_values = {500};
  run_mse_study(cfg, MseAxis::illuminations, 1);
  ExperimentConfig cfg4 = cfg;
  cfg4.out_dir = "exp_test_det_b";
  run_mse_study(cfg4, MseAxis::illuminations, 4);
  CHECK(slurp("exp_test_det_a/mse_illuminations.csv") ==
        slurp("exp_test_det_b/mse_illuminations.csv"));
  CHECK(slurp("exp_test_det_a/trials_illuminations.csv") ==
        slurp("exp_test_det_b/trials_illuminations.csv"));
  std::filesystem::remove_all("exp_test_det_a");
  std::filesystem::remove_all("exp_test_det_b");
}

}  // TEST_SUITE
