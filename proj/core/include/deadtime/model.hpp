#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace deadtime {

// Remainder of x modulo period, always in [0, period).
inline double pmod(double x, double period) {
  double r = std::fmod(x, period);
  if (r < 0.0) r += period;
  if (r >= period) r = 0.0;  // guards the fp edge r == period after the add
  return r;
}

// Signed wrap of a difference into (-period/2, period/2].
inline double wrap_delta(double d, double period) {
  double r = d - period * std::floor(d / period + 0.5);
  if (r <= -0.5 * period) r += period;
  return r;
}

// One ranging scene: periodic illumination at period t_r (ns), nonparalyzable detector
// dead time t_d (ns), Gaussian pulse of rms width sigma (ns) delayed by tau (ns),
// signal photons per period `signal` and background photons per period `background`.
// All rates are per nanosecond; all times nanoseconds.
struct SceneModel {
  double t_r = 0.0;
  double t_d = 0.0;
  double sigma = 1.0;
  double signal = 0.0;
  double background = 0.0;
  double tau = 0.0;

  double total_flux() const { return signal + background; }        // photons per period
  double background_rate() const { return background / t_r; }     // 1/ns
  double sbr() const { return background > 0.0 ? signal / background
                                               : std::numeric_limits<double>::infinity(); }
  double x_d() const { return pmod(t_d, t_r); }                   // dead time mod period

  // Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

// Uniform binning of one period: n_b bins of width t_bin = t_r / n_b, centers at
// (i + 1/2) t_bin, plus the dead time expressed in whole bins (n_d in [0, n_b)).
struct BinGrid {
  double t_r = 0.0;
  int n_b = 0;
  double t_bin = 0.0;
  int n_d = 0;

  static BinGrid make(const SceneModel& model, int n_b);

  double center(int i) const { return (i + 0.5) * t_bin; }
  double left_edge(int i) const { return i * t_bin; }
  // Bin index of a position in [0, t_r); edge hits resolve to the lower bin.
  int bin_of(double x) const {
    int i = static_cast<int>(x / t_bin);
    if (i >= n_b) i = n_b - 1;
    if (i < 0) i = 0;
    return i;
  }
};

// Arrival intensity lambda(x) in 1/ns at position x (interpreted modulo t_r).
double intensity_at(const SceneModel& model, double x);

// Integral of the intensity over [a, b] in closed form; a and b may span any number
// of periods and may be negative. Requires a <= b.
double cumulative_intensity(const SceneModel& model, double a, double b);

// Arrival-time density over one period sampled at bin centers, renormalized so that
// sum(pdf) * t_bin == 1. Throws DegenerateModelError when the total flux is zero.
std::vector<double> arrival_pdf(const SceneModel& model, const BinGrid& grid);

}  // namespace deadtime
