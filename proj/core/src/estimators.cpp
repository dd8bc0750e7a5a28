#include "deadtime/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "deadtime/correction.hpp"
#include "deadtime/errors.hpp"
#include "deadtime/markov.hpp"

namespace deadtime {

LambdaEstimate estimate_lambda_ml(const std::vector<std::int64_t>& idle_periods,
                                  double lambda_max) {
  if (idle_periods.empty())
    throw InsufficientDataError("estimate_lambda_ml: no interdetection gaps");
  if (!(lambda_max > 0.0))
    throw std::invalid_argument("estimate_lambda_ml: lambda_max must be positive");
  double sum = 0.0;
  for (std::int64_t r : idle_periods) {
    if (r < 0) throw std::invalid_argument("estimate_lambda_ml: negative idle count");
    sum += static_cast<double>(r);
  }
  LambdaEstimate out;
  if (sum == 0.0) {
    // Every gap was minimal; the likelihood increases without bound.
    out.lambda_hat = lambda_max;
    out.saturated = true;
    return out;
  }
  const double n = static_cast<double>(idle_periods.size());
  out.lambda_hat = std::log1p(n / sum);
  if (out.lambda_hat > lambda_max) {
    out.lambda_hat = lambda_max;
    out.saturated = true;
  }
  return out;
}

double estimate_background_ml(const EventSequence& detections, double t_d) {
  const std::size_t n = detections.times.size();
  if (n < 2) throw InsufficientDataError("estimate_background_ml: need at least 2 detections");
  if (!(t_d >= 0.0)) throw std::invalid_argument("estimate_background_ml: negative dead time");
  const double span = detections.times.back() - detections.times.front();
  const double live = span - static_cast<double>(n - 1) * t_d;
  if (!(live > 0.0))
    throw std::invalid_argument(
        "estimate_background_ml: detections violate the dead-time spacing");
  return static_cast<double>(n - 1) / live;
}

FluxEstimates estimate_signal(const LambdaEstimate& lambda, double background_rate,
                              double t_r, std::size_t n_used, double min_signal,
                              double min_background) {
  if (!(t_r > 0.0)) throw std::invalid_argument("estimate_signal: period must be positive");
  FluxEstimates out;
  out.b_hat = std::max(background_rate * t_r, min_background);
  out.lambda_hat = std::max(lambda.lambda_hat, out.b_hat + min_signal);
  out.s_hat = out.lambda_hat - out.b_hat;
  out.saturated = lambda.saturated;
  out.n_used = n_used;
  return out;
}

DelayEstimate log_matched_filter(const std::vector<double>& weights,
                                 const std::vector<double>& reference, const BinGrid& grid,
                                 double ref_delay, std::vector<double>* score_curve) {
  const std::size_t n = static_cast<std::size_t>(grid.n_b);
  if (weights.size() != n || reference.size() != n)
    throw std::invalid_argument("log_matched_filter: size mismatch with grid");

  std::vector<std::size_t> support;
  support.reserve(64);
  for (std::size_t k = 0; k < n; ++k) {
    if (weights[k] != 0.0) support.push_back(k);
  }
  if (support.empty())
    throw InsufficientDataError("log_matched_filter: histogram has no mass");

  std::vector<double> log_ref(n);
  for (std::size_t k = 0; k < n; ++k) log_ref[k] = std::log(std::max(reference[k], 1e-12));

  const long nb = grid.n_b;
  const auto signed_shift = [nb](long s) { return s > nb / 2 ? s - nb : s; };

  if (score_curve) score_curve->assign(n, 0.0);
  double best_score = 0.0;
  long best_s = -1;
  for (long s = 0; s < nb; ++s) {
    double score = 0.0;
    for (std::size_t k : support) {
      const long idx = (static_cast<long>(k) - s + nb) % nb;
      score += weights[k] * log_ref[static_cast<std::size_t>(idx)];
    }
    if (score_curve) (*score_curve)[static_cast<std::size_t>(s)] = score;
    if (best_s < 0 || score > best_score) {
      best_score = score;
      best_s = s;
    } else if (score == best_score) {
      const long cand = std::labs(signed_shift(s));
      const long cur = std::labs(signed_shift(best_s));
      if (cand < cur) best_s = s;  // equal |shift| keeps the earlier (smaller) index
    }
  }

  DelayEstimate out;
  out.shift_bins = signed_shift(best_s);
  out.score = best_score;
  out.tau_hat = pmod(ref_delay + static_cast<double>(out.shift_bins) * grid.t_bin, grid.t_r);
  return out;
}

DelayEstimate log_matched_filter(const BinnedHistogram& hist,
                                 const std::vector<double>& reference, double ref_delay,
                                 std::vector<double>* score_curve) {
  std::vector<double> w(hist.counts.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(hist.counts[i]);
  return log_matched_filter(w, reference, hist.grid, ref_delay, score_curve);
}

double mode_shift_offset(const std::vector<double>& detection_density,
                         const std::vector<double>& arrival_density, const BinGrid& grid) {
  const std::size_t n = static_cast<std::size_t>(grid.n_b);
  if (detection_density.size() != n || arrival_density.size() != n)
    throw std::invalid_argument("mode_shift_offset: size mismatch with grid");
  const long mode_det = static_cast<long>(
      std::max_element(detection_density.begin(), detection_density.end()) -
      detection_density.begin());
  const long mode_arr = static_cast<long>(
      std::max_element(arrival_density.begin(), arrival_density.end()) -
      arrival_density.begin());
  const long nb = grid.n_b;
  long d = ((mode_det - mode_arr) % nb + nb) % nb;
  if (d > nb / 2) d -= nb;
  return static_cast<double>(d) * grid.t_bin;
}

DepthMethod depth_method_from_name(const std::string& name) {
  std::string up;
  up.reserve(name.size());
  for (char c : name) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (up == "LF") return DepthMethod::lf;
  if (up == "HF") return DepthMethod::hf;
  if (up == "SC") return DepthMethod::sc;
  if (up == "MCPDF") return DepthMethod::mcpdf;
  if (up == "MCHC") return DepthMethod::mchc;
  throw UnsupportedModeError("unknown depth method: " + name);
}

std::string depth_method_name(DepthMethod m) {
  switch (m) {
    case DepthMethod::lf: return "LF";
    case DepthMethod::hf: return "HF";
    case DepthMethod::sc: return "SC";
    case DepthMethod::mcpdf: return "MCPDF";
    case DepthMethod::mchc: return "MCHC";
  }
  throw UnsupportedModeError("unknown depth method enum");
}

DepthRefs make_depth_refs(const SceneModel& model, const BinGrid& grid) {
  DepthRefs refs;
  refs.grid = grid;
  refs.ref_delay = model.tau;
  refs.arrival = arrival_pdf(model, grid);
  const TransitionKernel kernel = build_kernel(model, grid, TransitionKernel::Mode::matrix_free);
  refs.detection = stationary_distribution(kernel).pdf;
  refs.sc_offset = mode_shift_offset(refs.detection, refs.arrival, grid);
  refs.flux = model.total_flux();
  return refs;
}

DelayEstimate estimate_depth(DepthMethod method, const BinnedHistogram& hist,
                             const DepthRefs& refs) {
  DelayEstimate est;
  switch (method) {
    case DepthMethod::lf:
    case DepthMethod::hf:
      est = log_matched_filter(hist, refs.arrival, refs.ref_delay);
      break;
    case DepthMethod::sc:
      est = log_matched_filter(hist, refs.arrival, refs.ref_delay);
      est.tau_hat = pmod(est.tau_hat - refs.sc_offset, refs.grid.t_r);
      break;
    case DepthMethod::mcpdf:
      est = log_matched_filter(hist, refs.detection, refs.ref_delay);
      break;
    case DepthMethod::mchc: {
      const std::vector<double> h = hist.normalized();
      const InverseProblem problem = make_inverse_problem(h, refs.flux, refs.grid);
      const CorrectionResult sol =
          solve_mchc(problem, refs.correction_tol, refs.correction_max_iter);
      const std::vector<double> corrected = corrected_histogram(sol);
      est = log_matched_filter(corrected, refs.arrival, refs.grid, refs.ref_delay);
      break;
    }
  }
  est.method = depth_method_name(method);
  return est;
}

}  // namespace deadtime
