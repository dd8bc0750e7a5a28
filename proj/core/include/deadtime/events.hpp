#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "deadtime/model.hpp"

namespace deadtime {

// Strictly increasing absolute timestamps (ns) covering n_periods illumination periods.
struct EventSequence {
  std::vector<double> times;
  std::uint64_t n_periods = 0;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
};

// Per-bin event counts over one period.
struct BinnedHistogram {
  BinGrid grid;
  std::vector<std::int64_t> counts;

  std::int64_t total() const;
  // Counts scaled to a probability vector (sums to 1). Throws InsufficientDataError
  // when the histogram is empty.
  std::vector<double> normalized() const;
};

// Draws arrival sequences from a scene: per-period Poisson counts plus inverse-CDF
// positions. The inverse CDF uses a precomputed table for bracketing and safeguarded
// Newton refinement against the closed-form CDF, so draws follow the continuous law
// to near machine precision.
class ArrivalSampler {
 public:
  explicit ArrivalSampler(const SceneModel& model, int table_size = 20000);
  EventSequence sample(std::uint64_t n_periods, std::uint64_t seed) const;

 private:
  double invert(double u) const;

  SceneModel model_;
  double flux_;
  std::vector<double> table_x_;
  std::vector<double> table_f_;
};

// Convenience wrapper: one-off sampler construction plus draw.
EventSequence sample_arrivals(const SceneModel& model, std::uint64_t n_periods,
                              std::uint64_t seed);

// Nonparalyzable dead time: keeps the first event, then every event at least t_d
// after the previous kept one.
EventSequence apply_dead_time(const EventSequence& events, double t_d);

// Bernoulli thinning with keep probability p.
EventSequence thin(const EventSequence& events, double keep_prob, std::uint64_t seed);

// Folds timestamps into one period and counts per bin (edge ties go to the lower bin).
BinnedHistogram bin_detections(const EventSequence& events, const BinGrid& grid);

// Whole illumination periods elapsed between the end of each dead interval and the
// next detection: r_i = floor((t_{i+1} - t_i - t_d) / t_r). Fewer than two events
// yield an empty list.
std::vector<std::int64_t> interdetection_periods(const EventSequence& events, double t_d,
                                                 double t_r);

// CSV record stream: one f64 timestamp (ns) per line, no header.
void write_events_csv(const EventSequence& events, const std::string& path);
EventSequence read_events_csv(const std::string& path, std::uint64_t n_periods);

// Raw little-endian f64 stream for bulk storage.
void write_events_binary(const EventSequence& events, const std::string& path);
EventSequence read_events_binary(const std::string& path, std::uint64_t n_periods);

}  // namespace deadtime
