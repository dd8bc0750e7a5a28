#include "deadtime/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "deadtime/errors.hpp"

namespace deadtime {
namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// The periodic pulse is the sum of the two nearest periodic images of the Gaussian,
// normalized in closed form so its integral over one period is exactly 1. Two images
// are enough for sigma < t_r / 8 (the neglected images contribute < exp(-(8/2)^2/2)
// of the mass relative to machine precision); wider pulses stay exactly normalized,
// they just deviate from a true infinite periodization.
struct PulseShape {
  double sigma;
  double t_r;
  double norm;  // integral of the two-image sum over one period

  explicit PulseShape(const SceneModel& m)
      : sigma(m.sigma),
        t_r(m.t_r),
        norm(sigma * std::sqrt(2.0 * M_PI) * std::erf(t_r / (sigma * kSqrt2))) {}

  // Density at offset u = (x - tau) mod t_r, u in [0, t_r).
  double density(double u) const {
    const double a = u / sigma;
    const double b = (u - t_r) / sigma;
    return (std::exp(-0.5 * a * a) + std::exp(-0.5 * b * b)) / norm;
  }

  // Integral of the density over [0, u], u in [0, t_r].
  double partial_mass(double u) const {
    const double e_r = std::erf(t_r / (sigma * kSqrt2));
    return (std::erf(u / (sigma * kSqrt2)) + std::erf((u - t_r) / (sigma * kSqrt2)) + e_r) /
           (2.0 * e_r);
  }

  // Integral of the density over [0, w] for arbitrary real w (one full period adds 1).
  double mass(double w) const {
    const double k = std::floor(w / t_r);
    return k + partial_mass(w - k * t_r);
  }
};

}  // namespace

void SceneModel::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("SceneModel: " + msg); };
  if (!(t_r > 0.0) || !std::isfinite(t_r)) fail("t_r must be positive and finite");
  if (!(t_d >= 0.0) || !std::isfinite(t_d)) fail("t_d must be nonnegative and finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) fail("sigma must be positive and finite");
  if (!(signal >= 0.0) || !std::isfinite(signal)) fail("signal must be nonnegative and finite");
  if (!(background >= 0.0) || !std::isfinite(background))
    fail("background must be nonnegative and finite");
  if (!std::isfinite(tau)) fail("tau must be finite");
}

BinGrid BinGrid::make(const SceneModel& model, int n_b) {
  model.validate();
  if (n_b < 1) throw std::invalid_argument("BinGrid: n_b must be >= 1");
  BinGrid g;
  g.t_r = model.t_r;
  g.n_b = n_b;
  g.t_bin = model.t_r / n_b;
  int n_d = static_cast<int>(std::llround(model.x_d() / g.t_bin));
  g.n_d = n_d % n_b;  // x_d within half a bin of t_r wraps to zero shift
  return g;
}

double intensity_at(const SceneModel& model, double x) {
  const double u = pmod(x - model.tau, model.t_r);
  const PulseShape pulse(model);
  return model.background_rate() + model.signal * pulse.density(u);
}

double cumulative_intensity(const SceneModel& model, double a, double b) {
  if (!(a <= b)) throw std::invalid_argument("cumulative_intensity: requires a <= b");
  const PulseShape pulse(model);
  const double pulse_part = pulse.mass(b - model.tau) - pulse.mass(a - model.tau);
  return (b - a) * model.background_rate() + model.signal * pulse_part;
}

std::vector<double> arrival_pdf(const SceneModel& model, const BinGrid& grid) {
  model.validate();
  const double flux = model.total_flux();
  if (!(flux > 0.0)) throw DegenerateModelError("arrival_pdf: total flux is zero");
  std::vector<double> pdf(grid.n_b);
  for (int i = 0; i < grid.n_b; ++i) pdf[i] = intensity_at(model, grid.center(i)) / flux;
  double mass = 0.0;
  for (double v : pdf) mass += v;
  mass *= grid.t_bin;
  for (double& v : pdf) v /= mass;
  return pdf;
}

}  // namespace deadtime
