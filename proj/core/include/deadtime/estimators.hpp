#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deadtime/events.hpp"
#include "deadtime/model.hpp"

namespace deadtime {

struct LambdaEstimate {
  double lambda_hat = 0.0;
  bool saturated = false;  // no full idle period observed; clamped at lambda_max
};

// ML total flux per period from interdetection idle-period counts: with r_i full
// periods elapsed between consecutive detections, lambda_hat = ln((n + sum r) / sum r).
// When every gap is minimal (sum r = 0) the likelihood is maximized at infinity and
// the estimate saturates at lambda_max.
LambdaEstimate estimate_lambda_ml(const std::vector<std::int64_t>& idle_periods,
                                  double lambda_max = 20.0);

// ML background rate from a detection sequence: detections occur at rate
// lambda_b over live time, so rate_hat = (n - 1) / (span - (n - 1) * t_d).
double estimate_background_ml(const EventSequence& detections, double t_d);

struct FluxEstimates {
  double lambda_hat = 0.0;  // total arrivals per period
  double b_hat = 0.0;       // background arrivals per period
  double s_hat = 0.0;       // signal arrivals per period
  bool saturated = false;
  std::size_t n_used = 0;  // detections behind the estimates
};

// Combines the flux and background estimates with positivity floors so the signal
// component never collapses to zero or negative values.
FluxEstimates estimate_signal(const LambdaEstimate& lambda, double background_rate,
                              double t_r, std::size_t n_used, double min_signal = 0.01,
                              double min_background = 0.01);

struct DelayEstimate {
  double tau_hat = 0.0;  // in [0, t_r)
  long shift_bins = 0;   // signed circular shift relative to the reference
  double score = 0.0;    // log matched-filter value at the argmax
  std::string method;    // set by estimate_depth
};

// Circular log matched filter: slides the log of a reference per-bin density across
// the weighted histogram and returns the shift maximizing sum_k w_k log ref_(k-s).
// Ties go to the smallest shift magnitude, then the smaller raw shift index.
// ref_delay is the delay the reference was generated at. When score_curve is given
// it receives the full score sequence indexed by raw shift.
DelayEstimate log_matched_filter(const std::vector<double>& weights,
                                 const std::vector<double>& reference, const BinGrid& grid,
                                 double ref_delay, std::vector<double>* score_curve = nullptr);
DelayEstimate log_matched_filter(const BinnedHistogram& hist,
                                 const std::vector<double>& reference, double ref_delay,
                                 std::vector<double>* score_curve = nullptr);

// Signed displacement (ns) of the detection-density mode relative to the arrival
// mode, wrapped to (-t_r/2, t_r/2]. Subtracting it from a peak-matched estimate
// undoes the systematic peak shift dead time induces.
double mode_shift_offset(const std::vector<double>& detection_density,
                         const std::vector<double>& arrival_density, const BinGrid& grid);

enum class DepthMethod { lf, hf, sc, mcpdf, mchc };

DepthMethod depth_method_from_name(const std::string& name);
std::string depth_method_name(DepthMethod m);

// Precomputed references shared by every depth estimator for one scene.
struct DepthRefs {
  BinGrid grid;
  double ref_delay = 0.0;          // delay the reference densities were built at
  std::vector<double> arrival;     // arrival density (1/ns) at ref_delay
  std::vector<double> detection;   // stationary detection density (1/ns) at ref_delay
  double sc_offset = 0.0;          // mode-shift correction (ns)
  double flux = 0.0;               // total arrivals per period, for histogram correction
  double correction_tol = 1e-10;
  long correction_max_iter = 50000;
};

// Builds the reference bundle for a scene (the scene's tau is the reference delay).
DepthRefs make_depth_refs(const SceneModel& model, const BinGrid& grid);

// Estimates the pulse delay from a detection histogram.
//   lf     - matched filter against the arrival density (intended for thinned data)
//   hf     - matched filter against the arrival density on raw high-flux data
//   sc     - hf minus the precomputed mode-shift offset
//   mcpdf  - matched filter against the stationary detection density
//   mchc   - inverts the histogram to arrivals first, then matches the arrival density
DelayEstimate estimate_depth(DepthMethod method, const BinnedHistogram& hist,
                             const DepthRefs& refs);

}  // namespace deadtime
