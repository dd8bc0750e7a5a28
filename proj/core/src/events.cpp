#include "deadtime/events.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "deadtime/errors.hpp"
#include "deadtime/rng.hpp"

namespace deadtime {

std::int64_t BinnedHistogram::total() const {
  std::int64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::vector<double> BinnedHistogram::normalized() const {
  const double t = static_cast<double>(total());
  if (t <= 0.0) throw InsufficientDataError("BinnedHistogram::normalized: empty histogram");
  std::vector<double> freq(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) freq[i] = counts[i] / t;
  return freq;
}

ArrivalSampler::ArrivalSampler(const SceneModel& model, int table_size)
    : model_(model), flux_(model.total_flux()) {
  model.validate();
  if (table_size < 2) throw std::invalid_argument("ArrivalSampler: table_size must be >= 2");
  if (!(flux_ > 0.0)) return;  // degenerate scene: sample() returns empty sequences
  table_x_.resize(table_size + 1);
  table_f_.resize(table_size + 1);
  for (int j = 0; j <= table_size; ++j) {
    const double x = model.t_r * j / table_size;
    table_x_[j] = x;
    table_f_[j] = cumulative_intensity(model, 0.0, x) / flux_;
  }
  table_f_.front() = 0.0;
  table_f_.back() = 1.0;
}

double ArrivalSampler::invert(double u) const {
  const auto it = std::upper_bound(table_f_.begin(), table_f_.end(), u);
  std::size_t hi_idx = std::min<std::size_t>(it - table_f_.begin(), table_f_.size() - 1);
  std::size_t lo_idx = hi_idx - 1;
  double lo = table_x_[lo_idx], hi = table_x_[hi_idx];
  double f_lo = table_f_[lo_idx];
  double x = lo + (hi - lo) * (u - f_lo) / std::max(table_f_[hi_idx] - f_lo, 1e-300);
  for (int it_n = 0; it_n < 4; ++it_n) {
    const double err = cumulative_intensity(model_, 0.0, x) / flux_ - u;
    if (err > 0.0) hi = x; else lo = x;
    const double dens = intensity_at(model_, x) / flux_;
    double step = (dens > 1e-14) ? x - err / dens : 0.5 * (lo + hi);
    if (!(step > lo) || !(step < hi)) step = 0.5 * (lo + hi);
    x = step;
  }
  return std::min(std::max(x, 0.0), model_.t_r);
}

EventSequence ArrivalSampler::sample(std::uint64_t n_periods, std::uint64_t seed) const {
  EventSequence out;
  out.n_periods = n_periods;
  if (!(flux_ > 0.0)) return out;
  Rng rng(seed);
  out.times.reserve(static_cast<std::size_t>(flux_ * static_cast<double>(n_periods) * 1.1) + 16);
  for (std::uint64_t p = 0; p < n_periods; ++p) {
    const double t0 = static_cast<double>(p) * model_.t_r;
    const std::uint64_t count = rng.poisson(flux_);
    const std::size_t base = out.times.size();
    for (std::uint64_t c = 0; c < count; ++c) out.times.push_back(t0 + invert(rng.uniform()));
    std::sort(out.times.begin() + base, out.times.end());
  }
  // Strictly increasing: nudge fp ties upward (measure-zero, but keep the invariant).
  for (std::size_t i = 1; i < out.times.size(); ++i)
    if (out.times[i] <= out.times[i - 1])
      out.times[i] = std::nextafter(out.times[i - 1], std::numeric_limits<double>::infinity());
  return out;
}

EventSequence sample_arrivals(const SceneModel& model, std::uint64_t n_periods,
                              std::uint64_t seed) {
  return ArrivalSampler(model).sample(n_periods, seed);
}

EventSequence apply_dead_time(const EventSequence& events, double t_d) {
  if (t_d < 0.0) throw std::invalid_argument("apply_dead_time: t_d must be nonnegative");
  EventSequence out;
  out.n_periods = events.n_periods;
  out.times.reserve(events.times.size());
  double next_live = -std::numeric_limits<double>::infinity();
  for (double t : events.times) {
    if (t >= next_live) {
      out.times.push_back(t);
      next_live = t + t_d;
    }
  }
  return out;
}

EventSequence thin(const EventSequence& events, double keep_prob, std::uint64_t seed) {
  if (!(keep_prob >= 0.0) || !(keep_prob <= 1.0))
    throw std::invalid_argument("thin: keep_prob must be in [0, 1]");
  EventSequence out;
  out.n_periods = events.n_periods;
  out.times.reserve(events.times.size());
  Rng rng(seed);
  for (double t : events.times)
    if (rng.bernoulli(keep_prob)) out.times.push_back(t);
  return out;
}

BinnedHistogram bin_detections(const EventSequence& events, const BinGrid& grid) {
  BinnedHistogram h;
  h.grid = grid;
  h.counts.assign(grid.n_b, 0);
  for (double t : events.times) ++h.counts[grid.bin_of(pmod(t, grid.t_r))];
  return h;
}

std::vector<std::int64_t> interdetection_periods(const EventSequence& events, double t_d,
                                                 double t_r) {
  if (events.times.size() < 2) return {};
  std::vector<std::int64_t> r(events.times.size() - 1);
  for (std::size_t i = 0; i + 1 < events.times.size(); ++i) {
    const double gap = events.times[i + 1] - events.times[i] - t_d;
    r[i] = static_cast<std::int64_t>(std::floor(gap / t_r));
  }
  return r;
}

void write_events_csv(const EventSequence& events, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_events_csv: cannot open " + path);
  char buf[40];
  for (double t : events.times) {
    std::snprintf(buf, sizeof buf, "%.17g\n", t);
    out << buf;
  }
  if (!out) throw std::runtime_error("write_events_csv: write failed for " + path);
}

EventSequence read_events_csv(const std::string& path, std::uint64_t n_periods) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_events_csv: cannot open " + path);
  EventSequence out;
  out.n_periods = n_periods;
  double t;
  while (in >> t) out.times.push_back(t);
  return out;
}

void write_events_binary(const EventSequence& events, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_events_binary: cannot open " + path);
  out.write(reinterpret_cast<const char*>(events.times.data()),
            static_cast<std::streamsize>(events.times.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write_events_binary: write failed for " + path);
}

EventSequence read_events_binary(const std::string& path, std::uint64_t n_periods) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("read_events_binary: cannot open " + path);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  EventSequence out;
  out.n_periods = n_periods;
  out.times.resize(bytes / sizeof(double));
  in.read(reinterpret_cast<char*>(out.times.data()), static_cast<std::streamsize>(bytes));
  return out;
}

}  // namespace deadtime
