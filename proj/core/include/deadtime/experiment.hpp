#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "deadtime/model.hpp"

namespace deadtime {

// Malformed or inconsistent configuration; the CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TimingConfig {
  double t_r = 100.0;   // illumination period (ns)
  double t_d = 75.0;    // dead time (ns)
  double sigma = 0.2;   // pulse half width (ns)
  double t_bin = 0.05;  // histogram bin (ns)
};

enum class MseAxis { illuminations, detections };

MseAxis mse_axis_from_name(const std::string& name);
std::string mse_axis_name(MseAxis axis);

// One JSON document drives every experiment; unknown keys are rejected so typos
// fail loudly. Single-scene commands (simulate, stationary) use the first entry of
// each scene list.
struct ExperimentConfig {
  std::vector<double> s_values{3.16};
  std::vector<double> b_values{0.562};
  TimingConfig timing;
  std::vector<std::uint64_t> n_r_values{10000};
  int trials = 100;
  std::uint64_t base_seed = 1;
  std::vector<std::string> methods{"LF", "HF", "SC", "MCPDF"};
  std::string out_dir = "out";
  std::optional<double> tau;           // default: first on-grid center past t_r/2
  double tv_bin = 10.0;                // coarse bin (ns) for total-variation compares
  double lf_flux = 0.05;               // post-attenuation arrivals per period
  double lf_nr_scale = 20.0;           // extra illuminations for LF, detections axis
  std::string axis = "illuminations";  // default axis for mse-study

  static ExperimentConfig from_json_text(const std::string& text, const std::string& origin);
  static ExperimentConfig from_json_file(const std::string& path);

  void validate() const;  // throws ConfigError
  int n_b() const;
  double delay() const;
  SceneModel scene(double s, double b) const;
  BinGrid grid() const;
  int tv_cells() const;
};

// Runs fn(0..n-1) across a small worker pool. Results must go into preallocated
// slots indexed by the argument so output order never depends on thread count.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

struct DensitySummary {
  double s = 0.0, b = 0.0, t_r = 0.0;
  std::uint64_t n_r = 0;
  std::uint64_t detections = 0;
  double tv_sim_pred = 0.0;      // simulated histogram vs stationary prediction
  double tv_pred_arrival = 0.0;  // stationary prediction vs arrival pdf
  double tv_sim_arrival = 0.0;   // simulated histogram vs arrival pdf
};

// Per scene: simulates detections at each n_r, compares against the stationary
// prediction and the arrival pdf on the coarse TV grid, writes one full-resolution
// curve CSV per scene (at the largest n_r) plus a summary CSV.
std::vector<DensitySummary> run_density_compare(const ExperimentConfig& config, int threads);

struct FisherPoint {
  double s = 0.0, b = 0.0, t_r = 0.0;
  double fi_arrival = 0.0;   // per-detection information from the arrival pdf
  double fi_detection = 0.0; // per-detection information from the stationary pdf
  double ratio = 0.0;
};

std::vector<FisherPoint> run_fisher_map(const ExperimentConfig& config, int threads);

struct ParamEstimationRow {
  std::uint64_t n_r = 0;
  double b_median = 0.0, b_iqr = 0.0;
  double lambda_median = 0.0, lambda_iqr = 0.0;
  double s_median = 0.0, s_iqr = 0.0;
  double mse_true_params = 0.0;  // delay MSE with references from true S, B
  double mse_est_params = 0.0;   // delay MSE with references from per-trial estimates
  int trials = 0;
};

// Per-trial parameter estimation (flux from interdetection periods of the ranging
// run, background from a laser-off run with the same number of illuminations) and
// the matched-filter delay error with estimated vs true references.
std::vector<ParamEstimationRow> run_param_estimation(const ExperimentConfig& config,
                                                     int threads);

struct TrialRecord {
  double s = 0.0, b = 0.0;
  std::string method;
  std::uint64_t n_r = 0;        // illuminations actually simulated
  std::uint64_t detections = 0; // realized detection count in the histogram
  double tau_true = 0.0;
  double tau_hat = 0.0;
  double sq_err = 0.0;  // wrapped to (-t_r/2, t_r/2] before squaring
  std::uint64_t seed = 0;
};

struct MseCell {
  double s = 0.0, b = 0.0;
  std::string method;
  double axis_value = 0.0;           // n_r, or the detection-decile midpoint
  double axis_lo = 0.0, axis_hi = 0.0;
  double mean_detections = 0.0;
  double mse = 0.0;
  double std_err = 0.0;  // standard error of the squared-error mean
  int n_trials = 0;
};

struct MseStudyResult {
  std::vector<MseCell> cells;
  std::vector<TrialRecord> trials;
};

// Monte Carlo depth-estimation benchmark. All methods share each trial's arrival
// realization; LF draws from the attenuated intensity directly (exact Poisson
// thinning) and, on the detections axis, runs lf_nr_scale times more illuminations
// so its detection counts overlap the high-flux methods'. The detections axis pools
// each scene's realized counts into deciles and aggregates per (method, decile).
MseStudyResult run_mse_study(const ExperimentConfig& config, MseAxis axis, int threads);

int cli_entry(int argc, const char* const* argv);

}  // namespace deadtime
