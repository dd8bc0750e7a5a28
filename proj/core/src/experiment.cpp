#include "deadtime/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "deadtime/errors.hpp"
#include "deadtime/estimators.hpp"
#include "deadtime/events.hpp"
#include "deadtime/markov.hpp"
#include "deadtime/rng.hpp"
#include "deadtime/tabular.hpp"

namespace deadtime {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Sub-stream tags so the per-trial seed can spawn independent generators.
constexpr std::uint64_t kLfStream = 0x4c46;          // attenuated acquisition
constexpr std::uint64_t kBackgroundStream = 0x4247;  // laser-off acquisition
constexpr std::uint64_t kDensityStream = 0x4443;     // density-compare simulations

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& origin, const char* scope) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known)
      throw ConfigError(origin + ": unknown key \"" + std::string(scope) + item.key() + "\"");
  }
}

template <typename T>
void load_field(const json& j, const char* key, T& out, const std::string& origin) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": bad value for \"" + std::string(key) + "\": " + e.what());
  }
}

double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return kNaN;
  if (v.size() == 1) return v[0];
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

double iqr_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
}

struct MeanStats {
  double mean = kNaN;
  double std_err = kNaN;
  int n = 0;
};

MeanStats mean_stats(const std::vector<double>& v) {
  MeanStats out;
  double sum = 0.0;
  for (double x : v) {
    if (std::isnan(x)) continue;
    sum += x;
    ++out.n;
  }
  if (out.n == 0) return out;
  out.mean = sum / out.n;
  if (out.n == 1) {
    out.std_err = 0.0;
    return out;
  }
  double ss = 0.0;
  for (double x : v) {
    if (std::isnan(x)) continue;
    const double d = x - out.mean;
    ss += d * d;
  }
  out.std_err = std::sqrt(ss / (out.n - 1) / out.n);
  return out;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

MseAxis mse_axis_from_name(const std::string& name) {
  if (name == "illuminations") return MseAxis::illuminations;
  if (name == "detections") return MseAxis::detections;
  throw ConfigError("unknown mse-study axis: " + name +
                    " (expected illuminations or detections)");
}

std::string mse_axis_name(MseAxis axis) {
  return axis == MseAxis::illuminations ? "illuminations" : "detections";
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text,
                                                  const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(origin + ": top-level JSON value must be an object");
  check_keys(j,
             {"s_values", "b_values", "timing", "n_r_values", "trials", "base_seed",
              "methods", "out_dir", "tau", "tv_bin", "lf_flux", "lf_nr_scale", "axis"},
             origin, "");

  ExperimentConfig cfg;
  load_field(j, "s_values", cfg.s_values, origin);
  load_field(j, "b_values", cfg.b_values, origin);
  if (j.contains("timing")) {
    const json& t = j.at("timing");
    if (!t.is_object()) throw ConfigError(origin + ": \"timing\" must be an object");
    check_keys(t, {"t_r", "t_d", "sigma", "t_bin"}, origin, "timing.");
    load_field(t, "t_r", cfg.timing.t_r, origin);
    load_field(t, "t_d", cfg.timing.t_d, origin);
    load_field(t, "sigma", cfg.timing.sigma, origin);
    load_field(t, "t_bin", cfg.timing.t_bin, origin);
  }
  load_field(j, "n_r_values", cfg.n_r_values, origin);
  load_field(j, "trials", cfg.trials, origin);
  load_field(j, "base_seed", cfg.base_seed, origin);
  load_field(j, "methods", cfg.methods, origin);
  load_field(j, "out_dir", cfg.out_dir, origin);
  if (j.contains("tau")) {
    double tau = 0.0;
    load_field(j, "tau", tau, origin);
    cfg.tau = tau;
  }
  load_field(j, "tv_bin", cfg.tv_bin, origin);
  load_field(j, "lf_flux", cfg.lf_flux, origin);
  load_field(j, "lf_nr_scale", cfg.lf_nr_scale, origin);
  load_field(j, "axis", cfg.axis, origin);
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  return from_json_text(read_text_file(path), path);
}

int ExperimentConfig::n_b() const {
  if (!(timing.t_r > 0.0) || !(timing.t_bin > 0.0))
    throw ConfigError("timing.t_r and timing.t_bin must be positive");
  const double ratio = timing.t_r / timing.t_bin;
  const long long n = std::llround(ratio);
  if (n < 2 || std::abs(ratio - static_cast<double>(n)) > 1e-6)
    throw ConfigError("timing.t_bin must divide timing.t_r into at least 2 bins");
  if (n > 2000000) throw ConfigError("bin grid too fine (more than 2e6 bins)");
  return static_cast<int>(n);
}

double ExperimentConfig::delay() const {
  if (tau) return *tau;
  const int n = n_b();
  return (n / 2 + 0.5) * timing.t_bin;  // on-grid bin center just past mid-period
}

SceneModel ExperimentConfig::scene(double s, double b) const {
  SceneModel m;
  m.t_r = timing.t_r;
  m.t_d = timing.t_d;
  m.sigma = timing.sigma;
  m.signal = s;
  m.background = b;
  m.tau = delay();
  return m;
}

BinGrid ExperimentConfig::grid() const {
  return BinGrid::make(scene(s_values.front(), b_values.front()), n_b());
}

int ExperimentConfig::tv_cells() const {
  if (!(tv_bin > 0.0)) throw ConfigError("tv_bin must be positive");
  const double ratio = timing.t_r / tv_bin;
  const long long cells = std::llround(ratio);
  if (cells < 1 || std::abs(ratio - static_cast<double>(cells)) > 1e-6)
    throw ConfigError("tv_bin must divide timing.t_r");
  if (n_b() % cells != 0) throw ConfigError("tv_bin must be a multiple of timing.t_bin");
  return static_cast<int>(cells);
}

void ExperimentConfig::validate() const {
  if (s_values.empty() || b_values.empty()) throw ConfigError("scene lists must be nonempty");
  if (n_r_values.empty()) throw ConfigError("n_r_values must be nonempty");
  if (methods.empty()) throw ConfigError("methods must be nonempty");
  for (double s : s_values)
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("s_values must be finite and >= 0");
  for (double b : b_values)
    if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("b_values must be finite and >= 0");
  if (!(timing.t_d >= 0.0)) throw ConfigError("timing.t_d must be >= 0");
  if (!(timing.sigma > 0.0)) throw ConfigError("timing.sigma must be positive");
  for (std::uint64_t n : n_r_values)
    if (n < 1) throw ConfigError("n_r_values entries must be >= 1");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  for (const std::string& m : methods) {
    try {
      depth_method_from_name(m);
    } catch (const UnsupportedModeError& e) {
      throw ConfigError(e.what());
    }
  }
  if (out_dir.empty()) throw ConfigError("out_dir must be nonempty");
  if (tau && (!(*tau >= 0.0) || !(*tau < timing.t_r)))
    throw ConfigError("tau must lie in [0, timing.t_r)");
  if (!(lf_flux > 0.0)) throw ConfigError("lf_flux must be positive");
  if (!(lf_nr_scale >= 1.0)) throw ConfigError("lf_nr_scale must be >= 1");
  mse_axis_from_name(axis);
  n_b();
  tv_cells();
  try {
    scene(s_values.front(), b_values.front()).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int workers = std::min(threads, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto body = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      {
        std::lock_guard<std::mutex> lk(err_mutex);
        if (first_error) return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<DensitySummary> run_density_compare(const ExperimentConfig& config, int threads) {
  config.validate();
  ensure_out_dir(config.out_dir);
  const BinGrid grid = config.grid();
  const int cells = config.tv_cells();
  const int n_scenes = static_cast<int>(config.s_values.size() * config.b_values.size());
  const int n_nr = static_cast<int>(config.n_r_values.size());

  struct SceneCurve {
    double s = 0.0, b = 0.0;
    std::vector<double> sim_mass, pred_pdf, arrival;
  };
  std::vector<DensitySummary> rows(static_cast<std::size_t>(n_scenes) * n_nr);
  std::vector<SceneCurve> curves(static_cast<std::size_t>(n_scenes));

  parallel_for(n_scenes, threads, [&](int sc) {
    const double s = config.s_values[static_cast<std::size_t>(sc) / config.b_values.size()];
    const double b = config.b_values[static_cast<std::size_t>(sc) % config.b_values.size()];
    const SceneModel model = config.scene(s, b);
    const std::vector<double> arrival = arrival_pdf(model, grid);
    const TransitionKernel kernel =
        build_kernel(model, grid, TransitionKernel::Mode::matrix_free);
    const std::vector<double> pred = stationary_distribution(kernel).pdf;
    const std::vector<double> arr_coarse =
        coarsen_masses(density_to_masses(arrival, grid.t_bin), cells);
    const std::vector<double> pred_coarse =
        coarsen_masses(density_to_masses(pred, grid.t_bin), cells);
    const ArrivalSampler sampler(model);

    SceneCurve curve;
    curve.s = s;
    curve.b = b;
    curve.pred_pdf = pred;
    curve.arrival = arrival;
    for (int k = 0; k < n_nr; ++k) {
      const std::uint64_t n_r = config.n_r_values[static_cast<std::size_t>(k)];
      const std::uint64_t seed = derive_seed(
          config.base_seed, (kDensityStream << 32) |
                                (static_cast<std::uint64_t>(sc) << 16) |
                                static_cast<std::uint64_t>(k));
      const EventSequence detections =
          apply_dead_time(sampler.sample(n_r, seed), model.t_d);
      const BinnedHistogram hist = bin_detections(detections, grid);

      DensitySummary& row = rows[static_cast<std::size_t>(sc) * n_nr + k];
      row.s = s;
      row.b = b;
      row.t_r = model.t_r;
      row.n_r = n_r;
      row.detections = static_cast<std::uint64_t>(hist.total());
      if (row.detections == 0) {
        row.tv_sim_pred = row.tv_sim_arrival = 1.0;
        row.tv_pred_arrival = tv_distance(pred_coarse, arr_coarse);
        if (k == n_nr - 1) curve.sim_mass.assign(static_cast<std::size_t>(grid.n_b), 0.0);
        continue;
      }
      const std::vector<double> sim_mass = counts_to_masses(hist.counts);
      const std::vector<double> sim_coarse = coarsen_masses(sim_mass, cells);
      row.tv_sim_pred = tv_distance(sim_coarse, pred_coarse);
      row.tv_pred_arrival = tv_distance(pred_coarse, arr_coarse);
      row.tv_sim_arrival = tv_distance(sim_coarse, arr_coarse);
      if (k == n_nr - 1) curve.sim_mass = sim_mass;
    }
    curves[static_cast<std::size_t>(sc)] = std::move(curve);
  });

  for (const SceneCurve& c : curves) {
    const std::string name = "density_S" + format_g9(c.s) + "_B" + format_g9(c.b) + "_tr" +
                             format_g9(config.timing.t_r) + ".csv";
    CsvFile out(join_path(config.out_dir, name),
                {"bin_center_ns", "sim_freq", "pred_pdf", "arrival_pdf"});
    for (int i = 0; i < grid.n_b; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      out.write({format_g9(grid.center(i)), format_g9(c.sim_mass[k]),
                 format_g9(c.pred_pdf[k]), format_g9(c.arrival[k])});
    }
    out.close();
  }
  CsvFile summary(join_path(config.out_dir, "density_summary.csv"),
                  {"S", "B", "t_r", "n_r", "detections", "tv_sim_pred", "tv_pred_arrival",
                   "tv_sim_arrival"});
  for (const DensitySummary& r : rows) {
    summary.write({format_g9(r.s), format_g9(r.b), format_g9(r.t_r), std::to_string(r.n_r),
                   std::to_string(r.detections), format_g9(r.tv_sim_pred),
                   format_g9(r.tv_pred_arrival), format_g9(r.tv_sim_arrival)});
  }
  summary.close();
  return rows;
}

std::vector<FisherPoint> run_fisher_map(const ExperimentConfig& config, int threads) {
  config.validate();
  ensure_out_dir(config.out_dir);
  const int n_points = static_cast<int>(config.s_values.size() * config.b_values.size());
  std::vector<FisherPoint> points(static_cast<std::size_t>(n_points));

  parallel_for(n_points, threads, [&](int i) {
    const double s = config.s_values[static_cast<std::size_t>(i) / config.b_values.size()];
    const double b = config.b_values[static_cast<std::size_t>(i) % config.b_values.size()];
    const SceneModel model = config.scene(s, b);
    const BinGrid grid = BinGrid::make(model, config.n_b());
    FisherPoint& p = points[static_cast<std::size_t>(i)];
    p.s = s;
    p.b = b;
    p.t_r = model.t_r;
    p.fi_arrival = fisher_information(model, grid, DensityKind::arrival);
    p.fi_detection = fisher_information(model, grid, DensityKind::detection);
    p.ratio = p.fi_detection / p.fi_arrival;
  });

  CsvFile out(join_path(config.out_dir, "fisher_map.csv"),
              {"S", "B", "t_r", "FI_A", "FI_D", "ratio"});
  for (const FisherPoint& p : points) {
    out.write({format_g9(p.s), format_g9(p.b), format_g9(p.t_r), format_g9(p.fi_arrival),
               format_g9(p.fi_detection), format_g9(p.ratio)});
  }
  out.close();
  return points;
}

std::vector<ParamEstimationRow> run_param_estimation(const ExperimentConfig& config,
                                                     int threads) {
  config.validate();
  ensure_out_dir(config.out_dir);
  const BinGrid grid = config.grid();
  const SceneModel truth = config.scene(config.s_values.front(), config.b_values.front());
  const SceneModel laser_off = config.scene(0.0, config.b_values.front());
  const std::vector<double> ref_true =
      stationary_distribution(build_kernel(truth, grid, TransitionKernel::Mode::matrix_free))
          .pdf;
  const ArrivalSampler on_sampler(truth);
  const ArrivalSampler off_sampler(laser_off);

  struct Trial {
    double b_hat = 0.0, lambda_hat = 0.0, s_hat = 0.0;
    double sq_true = kNaN, sq_est = kNaN;
    std::uint64_t detections = 0;
    std::uint64_t seed = 0;
  };

  std::vector<ParamEstimationRow> rows;
  rows.reserve(config.n_r_values.size());
  CsvFile trials_csv(join_path(config.out_dir, "param_trials.csv"),
                     {"n_r", "trial", "seed", "detections", "b_hat", "lambda_hat", "s_hat",
                      "sq_err_true_params", "sq_err_est_params"});

  for (const std::uint64_t n_r : config.n_r_values) {
    std::vector<Trial> trials(static_cast<std::size_t>(config.trials));
    parallel_for(config.trials, threads, [&](int t) {
      Trial& tr = trials[static_cast<std::size_t>(t)];
      tr.seed = config.base_seed + static_cast<std::uint64_t>(t);

      const EventSequence detections =
          apply_dead_time(on_sampler.sample(n_r, tr.seed), truth.t_d);
      const BinnedHistogram hist = bin_detections(detections, grid);
      tr.detections = static_cast<std::uint64_t>(hist.total());

      LambdaEstimate lam;
      try {
        lam = estimate_lambda_ml(interdetection_periods(detections, truth.t_d, truth.t_r));
      } catch (const InsufficientDataError&) {
        lam = LambdaEstimate{};  // no gaps observed; the floor clamps take over
      }
      double bg_rate = 0.0;
      try {
        const EventSequence off_detections = apply_dead_time(
            off_sampler.sample(n_r, derive_seed(tr.seed, kBackgroundStream)), truth.t_d);
        bg_rate = estimate_background_ml(off_detections, truth.t_d);
      } catch (const InsufficientDataError&) {
        bg_rate = 0.0;
      }
      const FluxEstimates flux =
          estimate_signal(lam, bg_rate, truth.t_r, detections.times.size());
      tr.b_hat = flux.b_hat;
      tr.lambda_hat = flux.lambda_hat;
      tr.s_hat = flux.s_hat;

      if (tr.detections == 0) return;
      const SceneModel est_model = config.scene(flux.s_hat, flux.b_hat);
      const std::vector<double> ref_est =
          stationary_distribution(
              build_kernel(est_model, grid, TransitionKernel::Mode::matrix_free))
              .pdf;
      const DelayEstimate with_true = log_matched_filter(hist, ref_true, truth.tau);
      const DelayEstimate with_est = log_matched_filter(hist, ref_est, truth.tau);
      const double err_true = wrap_delta(with_true.tau_hat - truth.tau, truth.t_r);
      const double err_est = wrap_delta(with_est.tau_hat - truth.tau, truth.t_r);
      tr.sq_true = err_true * err_true;
      tr.sq_est = err_est * err_est;
    });

    std::vector<double> b_vals, l_vals, s_vals, sq_true, sq_est;
    for (const Trial& tr : trials) {
      b_vals.push_back(tr.b_hat);
      l_vals.push_back(tr.lambda_hat);
      s_vals.push_back(tr.s_hat);
      sq_true.push_back(tr.sq_true);
      sq_est.push_back(tr.sq_est);
    }
    ParamEstimationRow row;
    row.n_r = n_r;
    row.trials = config.trials;
    row.b_median = median_of(b_vals);
    row.b_iqr = iqr_of(b_vals);
    row.lambda_median = median_of(l_vals);
    row.lambda_iqr = iqr_of(l_vals);
    row.s_median = median_of(s_vals);
    row.s_iqr = iqr_of(s_vals);
    row.mse_true_params = mean_stats(sq_true).mean;
    row.mse_est_params = mean_stats(sq_est).mean;
    rows.push_back(row);

    for (int t = 0; t < config.trials; ++t) {
      const Trial& tr = trials[static_cast<std::size_t>(t)];
      trials_csv.write({std::to_string(n_r), std::to_string(t), std::to_string(tr.seed),
                        std::to_string(tr.detections), format_g9(tr.b_hat),
                        format_g9(tr.lambda_hat), format_g9(tr.s_hat), format_g9(tr.sq_true),
                        format_g9(tr.sq_est)});
    }
  }
  trials_csv.close();

  CsvFile out(join_path(config.out_dir, "param_estimation.csv"),
              {"n_r", "trials", "b_median", "b_iqr", "lambda_median", "lambda_iqr",
               "s_median", "s_iqr", "mse_true_params", "mse_est_params"});
  for (const ParamEstimationRow& r : rows) {
    out.write({std::to_string(r.n_r), std::to_string(r.trials), format_g9(r.b_median),
               format_g9(r.b_iqr), format_g9(r.lambda_median), format_g9(r.lambda_iqr),
               format_g9(r.s_median), format_g9(r.s_iqr), format_g9(r.mse_true_params),
               format_g9(r.mse_est_params)});
  }
  out.close();
  return rows;
}

MseStudyResult run_mse_study(const ExperimentConfig& config, MseAxis axis, int threads) {
  config.validate();
  ensure_out_dir(config.out_dir);
  const BinGrid grid = config.grid();
  const int n_methods = static_cast<int>(config.methods.size());
  const int n_nr = static_cast<int>(config.n_r_values.size());
  const int n_scenes = static_cast<int>(config.s_values.size() * config.b_values.size());
  std::vector<DepthMethod> methods;
  for (const std::string& m : config.methods) methods.push_back(depth_method_from_name(m));
  const bool any_highflux =
      std::any_of(methods.begin(), methods.end(), [](DepthMethod m) {
        return m != DepthMethod::lf;
      });
  const bool any_lf = std::any_of(methods.begin(), methods.end(), [](DepthMethod m) {
    return m == DepthMethod::lf;
  });

  MseStudyResult result;
  result.trials.resize(static_cast<std::size_t>(n_scenes) * n_methods * n_nr *
                       config.trials);
  const auto slot = [&](int sc, int m, int k, int t) {
    return ((static_cast<std::size_t>(sc) * n_methods + m) * n_nr + k) * config.trials + t;
  };

  for (int sc = 0; sc < n_scenes; ++sc) {
    const double s = config.s_values[static_cast<std::size_t>(sc) / config.b_values.size()];
    const double b = config.b_values[static_cast<std::size_t>(sc) % config.b_values.size()];
    const SceneModel model = config.scene(s, b);
    const DepthRefs refs = make_depth_refs(model, grid);

    // LF samples the attenuated intensity directly (thinning a Poisson process is
    // the same process with scaled intensity), so high-attenuation runs stay cheap.
    const double keep = std::min(1.0, config.lf_flux / std::max(model.total_flux(), 1e-300));
    const SceneModel lf_model = config.scene(s * keep, b * keep);
    const ArrivalSampler hf_sampler(model);
    const ArrivalSampler lf_sampler(lf_model);

    parallel_for(n_nr * config.trials, threads, [&](int job) {
      const int k = job / config.trials;
      const int t = job % config.trials;
      const std::uint64_t n_r = config.n_r_values[static_cast<std::size_t>(k)];
      const std::uint64_t trial_seed = config.base_seed + static_cast<std::uint64_t>(t);

      BinnedHistogram hist_hf;
      if (any_highflux) {
        const EventSequence detections =
            apply_dead_time(hf_sampler.sample(n_r, trial_seed), model.t_d);
        hist_hf = bin_detections(detections, grid);
      }
      BinnedHistogram hist_lf;
      std::uint64_t lf_n_r = n_r;
      if (any_lf) {
        if (axis == MseAxis::detections)
          lf_n_r = static_cast<std::uint64_t>(
              std::llround(static_cast<double>(n_r) * config.lf_nr_scale));
        const EventSequence lf_detections = apply_dead_time(
            lf_sampler.sample(lf_n_r, derive_seed(trial_seed, kLfStream)), model.t_d);
        hist_lf = bin_detections(lf_detections, grid);
      }

      for (int m = 0; m < n_methods; ++m) {
        const bool is_lf = methods[static_cast<std::size_t>(m)] == DepthMethod::lf;
        const BinnedHistogram& hist = is_lf ? hist_lf : hist_hf;
        TrialRecord& rec = result.trials[slot(sc, m, k, t)];
        rec.s = s;
        rec.b = b;
        rec.method = config.methods[static_cast<std::size_t>(m)];
        rec.n_r = is_lf ? lf_n_r : n_r;
        rec.detections = static_cast<std::uint64_t>(hist.total());
        rec.tau_true = model.tau;
        rec.seed = trial_seed;
        if (rec.detections == 0) {
          rec.tau_hat = kNaN;
          rec.sq_err = kNaN;
          continue;
        }
        const DelayEstimate est =
            estimate_depth(methods[static_cast<std::size_t>(m)], hist, refs);
        rec.tau_hat = est.tau_hat;
        const double err = wrap_delta(est.tau_hat - model.tau, model.t_r);
        rec.sq_err = err * err;
      }
    });
  }

  // Aggregate into cells.
  for (int sc = 0; sc < n_scenes; ++sc) {
    const double s = config.s_values[static_cast<std::size_t>(sc) / config.b_values.size()];
    const double b = config.b_values[static_cast<std::size_t>(sc) % config.b_values.size()];
    if (axis == MseAxis::illuminations) {
      for (int m = 0; m < n_methods; ++m) {
        for (int k = 0; k < n_nr; ++k) {
          std::vector<double> sq, det;
          for (int t = 0; t < config.trials; ++t) {
            const TrialRecord& rec = result.trials[slot(sc, m, k, t)];
            if (std::isnan(rec.sq_err)) continue;
            sq.push_back(rec.sq_err);
            det.push_back(static_cast<double>(rec.detections));
          }
          const MeanStats stats = mean_stats(sq);
          if (stats.n == 0) continue;
          MseCell cell;
          cell.s = s;
          cell.b = b;
          cell.method = config.methods[static_cast<std::size_t>(m)];
          cell.axis_value = static_cast<double>(config.n_r_values[static_cast<std::size_t>(k)]);
          cell.axis_lo = cell.axis_hi = cell.axis_value;
          cell.mean_detections = mean_stats(det).mean;
          cell.mse = stats.mean;
          cell.std_err = stats.std_err;
          cell.n_trials = stats.n;
          result.cells.push_back(cell);
        }
      }
    } else {
      std::vector<double> pooled;
      for (int m = 0; m < n_methods; ++m)
        for (int k = 0; k < n_nr; ++k)
          for (int t = 0; t < config.trials; ++t) {
            const TrialRecord& rec = result.trials[slot(sc, m, k, t)];
            if (!std::isnan(rec.sq_err))
              pooled.push_back(static_cast<double>(rec.detections));
          }
      if (pooled.empty()) continue;
      std::sort(pooled.begin(), pooled.end());
      std::vector<double> edges(11);
      for (int e = 0; e <= 10; ++e) edges[static_cast<std::size_t>(e)] =
          quantile_sorted(pooled, static_cast<double>(e) / 10.0);
      const auto bin_of_count = [&](double d) {
        int lo = 0;
        for (int e = 1; e <= 9; ++e)
          if (d >= edges[static_cast<std::size_t>(e)]) lo = e;
        return lo;
      };
      for (int m = 0; m < n_methods; ++m) {
        std::vector<std::vector<double>> sq(10), det(10);
        for (int k = 0; k < n_nr; ++k)
          for (int t = 0; t < config.trials; ++t) {
            const TrialRecord& rec = result.trials[slot(sc, m, k, t)];
            if (std::isnan(rec.sq_err)) continue;
            const int cell_idx = bin_of_count(static_cast<double>(rec.detections));
            sq[static_cast<std::size_t>(cell_idx)].push_back(rec.sq_err);
            det[static_cast<std::size_t>(cell_idx)].push_back(
                static_cast<double>(rec.detections));
          }
        for (int e = 0; e < 10; ++e) {
          const MeanStats stats = mean_stats(sq[static_cast<std::size_t>(e)]);
          if (stats.n == 0) continue;
          MseCell cell;
          cell.s = s;
          cell.b = b;
          cell.method = config.methods[static_cast<std::size_t>(m)];
          cell.axis_lo = edges[static_cast<std::size_t>(e)];
          cell.axis_hi = edges[static_cast<std::size_t>(e) + 1];
          cell.axis_value = 0.5 * (cell.axis_lo + cell.axis_hi);
          cell.mean_detections = mean_stats(det[static_cast<std::size_t>(e)]).mean;
          cell.mse = stats.mean;
          cell.std_err = stats.std_err;
          cell.n_trials = stats.n;
          result.cells.push_back(cell);
        }
      }
    }
  }

  const std::string tag = mse_axis_name(axis);
  CsvFile cells_csv(join_path(config.out_dir, "mse_" + tag + ".csv"),
                    {"S", "B", "method", "axis_value", "axis_lo", "axis_hi",
                     "mean_detections", "mse", "std_err", "trials"});
  for (const MseCell& c : result.cells) {
    cells_csv.write({format_g9(c.s), format_g9(c.b), c.method, format_g9(c.axis_value),
                     format_g9(c.axis_lo), format_g9(c.axis_hi),
                     format_g9(c.mean_detections), format_g9(c.mse), format_g9(c.std_err),
                     std::to_string(c.n_trials)});
  }
  cells_csv.close();

  CsvFile trials_csv(join_path(config.out_dir, "trials_" + tag + ".csv"),
                     {"S", "B", "method", "n_r", "detections", "tau_true", "tau_hat",
                      "sq_err", "seed"});
  for (const TrialRecord& r : result.trials) {
    trials_csv.write({format_g9(r.s), format_g9(r.b), r.method, std::to_string(r.n_r),
                      std::to_string(r.detections), format_g9(r.tau_true),
                      format_g9(r.tau_hat), format_g9(r.sq_err), std::to_string(r.seed)});
  }
  trials_csv.close();
  return result;
}

}  // namespace deadtime
