#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deadtime/correction.hpp"
#include "deadtime/errors.hpp"
#include "deadtime/events.hpp"
#include "deadtime/experiment.hpp"
#include "deadtime/markov.hpp"
#include "deadtime/model.hpp"
#include "deadtime/tabular.hpp"

namespace deadtime {

namespace {

namespace fs = std::filesystem;

std::string join_out(const std::string& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  return (fs::path(dir) / name).string();
}

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
};

ExperimentConfig load_config(const GlobalArgs& g) {
  ExperimentConfig cfg = g.config_path.empty() ? ExperimentConfig{}
                                               : ExperimentConfig::from_json_file(g.config_path);
  if (g.seed_set) cfg.base_seed = g.seed;
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  cfg.validate();
  return cfg;
}

void run_simulate(const GlobalArgs& g) {
  const ExperimentConfig cfg = load_config(g);
  const SceneModel model = cfg.scene(cfg.s_values.front(), cfg.b_values.front());
  const std::uint64_t n_r = cfg.n_r_values.front();
  const EventSequence arrivals = sample_arrivals(model, n_r, cfg.base_seed);
  const EventSequence detections = apply_dead_time(arrivals, model.t_d);
  const std::string arrivals_path = join_out(cfg.out_dir, "arrivals.csv");
  const std::string detections_path = join_out(cfg.out_dir, "detections.csv");
  write_events_csv(arrivals, arrivals_path);
  write_events_csv(detections, detections_path);
  std::cout << "simulated " << n_r << " periods: " << arrivals.size() << " arrivals, "
            << detections.size() << " detections\n";
  std::cout << "wrote " << arrivals_path << "\n";
  std::cout << "wrote " << detections_path << "\n";
}

void run_stationary(const GlobalArgs& g) {
  const ExperimentConfig cfg = load_config(g);
  const SceneModel model = cfg.scene(cfg.s_values.front(), cfg.b_values.front());
  const BinGrid grid = cfg.grid();
  const TransitionKernel kernel = build_kernel(model, grid, TransitionKernel::Mode::matrix_free);
  const std::vector<double> pdf = stationary_distribution(kernel).pdf;
  const std::string path = join_out(cfg.out_dir, "stationary.csv");
  CsvFile out(path, {"bin_center_ns", "value"});
  for (int i = 0; i < grid.n_b; ++i)
    out.write({format_g9(grid.center(i)), format_g9(pdf[static_cast<std::size_t>(i)])});
  out.close();
  std::cout << "wrote " << path << "\n";
}

void run_fisher_cmd(const GlobalArgs& g) {
  const ExperimentConfig cfg = load_config(g);
  const std::vector<FisherPoint> points = run_fisher_map(cfg, g.threads);
  std::cout << "computed " << points.size() << " flux points\n";
  std::cout << "wrote " << (fs::path(cfg.out_dir) / "fisher_map.csv").string() << "\n";
}

void run_estimate_cmd(const GlobalArgs& g) {
  const ExperimentConfig cfg = load_config(g);
  run_param_estimation(cfg, g.threads);
  std::cout << "wrote " << (fs::path(cfg.out_dir) / "param_estimation.csv").string() << "\n";
  std::cout << "wrote " << (fs::path(cfg.out_dir) / "param_trials.csv").string() << "\n";
}

void run_density_cmd(const GlobalArgs& g) {
  const ExperimentConfig cfg = load_config(g);
  const std::vector<DensitySummary> rows = run_density_compare(cfg, g.threads);
  std::cout << "compared " << rows.size() << " scene/duration pairs\n";
  for (double s : cfg.s_values)
    for (double b : cfg.b_values)
      std::cout << "wrote "
                << (fs::path(cfg.out_dir) /
                    ("density_S" + format_g9(s) + "_B" + format_g9(b) + "_tr" +
                     format_g9(cfg.timing.t_r) + ".csv"))
                       .string()
                << "\n";
  std::cout << "wrote " << (fs::path(cfg.out_dir) / "density_summary.csv").string() << "\n";
}

struct MseArgs {
  std::string axis;
  int trials = 0;
};

void run_mse_cmd(const GlobalArgs& g, const MseArgs& a) {
  ExperimentConfig cfg = load_config(g);
  if (!a.axis.empty()) cfg.axis = a.axis;
  if (a.trials > 0) cfg.trials = a.trials;
  cfg.validate();
  const MseAxis axis = mse_axis_from_name(cfg.axis);
  const MseStudyResult result = run_mse_study(cfg, axis, g.threads);
  std::cout << "ran " << result.trials.size() << " method trials into " << result.cells.size()
            << " cells\n";
  const std::string tag = mse_axis_name(axis);
  std::cout << "wrote " << (fs::path(cfg.out_dir) / ("mse_" + tag + ".csv")).string() << "\n";
  std::cout << "wrote " << (fs::path(cfg.out_dir) / ("trials_" + tag + ".csv")).string() << "\n";
}

struct CorrectArgs {
  std::string hist_path;
  double flux = 0.0;
  double dead_time = 0.0;
  double tol = 1e-10;
  long max_iter = 50000;
  bool trace = false;
};

void run_correct_cmd(const GlobalArgs& g, const CorrectArgs& a) {
  const std::string out_dir = g.out_dir.empty() ? std::string("out") : g.out_dir;
  const HistogramFile hist = read_histogram_csv(a.hist_path);
  const int n_b = static_cast<int>(hist.centers.size());
  if (!(a.flux > 0.0)) throw ConfigError("--lambda must be positive");
  if (!(a.dead_time >= 0.0)) throw ConfigError("--dead-time must be >= 0");

  BinGrid grid;
  grid.t_r = hist.t_r;
  grid.n_b = n_b;
  grid.t_bin = hist.t_bin;
  grid.n_d = static_cast<int>(std::llround(pmod(a.dead_time, hist.t_r) / hist.t_bin) %
                              static_cast<long long>(n_b));

  const std::vector<double> h = counts_to_masses(hist.counts);
  const InverseProblem problem = make_inverse_problem(h, a.flux, grid);
  const CorrectionResult result = solve_mchc(problem, a.tol, a.max_iter);
  const std::vector<double> corrected = corrected_histogram(result);

  const std::string csv_path = join_out(out_dir, "corrected.csv");
  CsvFile out(csv_path, {"bin_center_ns", "corrected_freq"});
  for (int i = 0; i < n_b; ++i)
    out.write({format_g9(hist.centers[static_cast<std::size_t>(i)]),
               format_g9(corrected[static_cast<std::size_t>(i)])});
  out.close();

  nlohmann::json diag;
  diag["iterations"] = result.iterations;
  diag["final_objective"] = result.final_objective;
  diag["termination"] = result.termination;
  diag["init_fallback"] = problem.init_fallback;
  diag["box_max"] = problem.box_max;
  diag["flux"] = problem.flux;
  diag["n_b"] = n_b;
  if (a.trace) diag["objective_trace"] = result.objective_trace;
  const std::string diag_path = join_out(out_dir, "diagnostics.json");
  std::ofstream diag_out(diag_path, std::ios::binary);
  if (!diag_out) throw std::runtime_error("cannot open " + diag_path);
  diag_out << diag.dump(2) << "\n";
  diag_out.close();

  std::cout << "correction " << result.termination << " after " << result.iterations
            << " iterations (objective " << format_g9(result.final_objective) << ")\n";
  std::cout << "wrote " << csv_path << "\n";
  std::cout << "wrote " << diag_path << "\n";
}

}  // namespace

int cli_entry(int argc, const char* const* argv) {
  CLI::App app{"Dead-time distorted single-photon lidar: simulation, inversion, and "
               "depth-estimation studies"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "JSON experiment configuration file");
  auto* seed_opt = app.add_option("--seed", g.seed, "override the configured base seed");
  app.add_option("--out-dir", g.out_dir, "override the configured output directory");
  app.add_option("--threads", g.threads, "worker threads for trial loops")
      ->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand(
      "simulate", "sample one acquisition (arrival and detection timestamps)");
  auto* stationary = app.add_subcommand(
      "stationary", "long-run detection-time density for the configured scene");
  auto* fisher = app.add_subcommand(
      "fisher", "delay Fisher information of arrival vs detection densities");
  auto* estimate = app.add_subcommand(
      "estimate", "Monte Carlo flux-estimation study (background, total, signal)");
  auto* density = app.add_subcommand(
      "density-compare", "simulated histogram vs predicted and arrival densities");
  auto* mse = app.add_subcommand(
      "mse-study", "Monte Carlo depth-error comparison of the estimation methods");
  MseArgs mse_args;
  mse->add_option("--axis", mse_args.axis, "sweep axis: illuminations or detections")
      ->check(CLI::IsMember({"illuminations", "detections"}));
  mse->add_option("--trials", mse_args.trials, "override the configured trial count")
      ->check(CLI::PositiveNumber);

  auto* correct = app.add_subcommand(
      "correct", "invert a detection histogram into an arrival histogram");
  CorrectArgs correct_args;
  correct->add_option("--hist", correct_args.hist_path,
                      "detection histogram CSV (bin_center_ns,count)")
      ->required();
  correct->add_option("--lambda", correct_args.flux, "total arrivals per period")
      ->required();
  correct->add_option("--dead-time", correct_args.dead_time, "detector dead time (ns)")
      ->required();
  correct->add_option("--tol", correct_args.tol, "relative objective-change stop (default 1e-10)");
  correct->add_option("--max-iter", correct_args.max_iter, "iteration cap (default 50000)");
  correct->add_flag("--trace", correct_args.trace, "include the objective trace in diagnostics");

  for (CLI::App* sub : {simulate, stationary, fisher, estimate, density, mse, correct})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (simulate->parsed()) run_simulate(g);
    if (stationary->parsed()) run_stationary(g);
    if (fisher->parsed()) run_fisher_cmd(g);
    if (estimate->parsed()) run_estimate_cmd(g);
    if (density->parsed()) run_density_cmd(g);
    if (mse->parsed()) run_mse_cmd(g, mse_args);
    if (correct->parsed()) run_correct_cmd(g, correct_args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace deadtime
