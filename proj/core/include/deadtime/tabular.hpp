#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace deadtime {

// Fixed numeric format for all CSV output: 9 significant digits, shortest form.
std::string format_g9(double v);

// Streams rows to a CSV file with a fixed column count; throws std::runtime_error
// with path context on open/write failure.
class CsvFile {
 public:
  CsvFile(const std::string& path, const std::vector<std::string>& header);
  void write(const std::vector<std::string>& cells);
  void close();  // flush and fail loudly; also called by the destructor
  ~CsvFile();

  CsvFile(const CsvFile&) = delete;
  CsvFile& operator=(const CsvFile&) = delete;

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t width_ = 0;
  bool closed_ = false;
};

struct HistogramFile {
  std::vector<double> centers;       // bin centers (ns), ascending
  std::vector<std::int64_t> counts;  // per-bin counts
  double t_bin = 0.0;                // inferred from center spacing
  double t_r = 0.0;                  // n_b * t_bin
};

// Reads a (bin_center_ns, count) CSV; a non-numeric first line is treated as a
// header. Spacing must be uniform and counts non-negative.
HistogramFile read_histogram_csv(const std::string& path);

// Total-variation distance between probability vectors of equal length.
double tv_distance(const std::vector<double>& p, const std::vector<double>& q);

// Sums fine per-bin masses into n_coarse equal chunks; the fine length must be an
// exact multiple of n_coarse. Used to compare histograms against predicted densities
// on a coarser grid, where empirical noise per bin no longer dominates.
std::vector<double> coarsen_masses(const std::vector<double>& mass, int n_coarse);

// Per-bin masses from a density sampled at bin centers, and from raw counts.
std::vector<double> density_to_masses(const std::vector<double>& pdf, double t_bin);
std::vector<double> counts_to_masses(const std::vector<std::int64_t>& counts);

}  // namespace deadtime
