#include "deadtime/tabular.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "deadtime/errors.hpp"

namespace deadtime {

std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

CsvFile::CsvFile(const std::string& path, const std::vector<std::string>& header)
    : path_(path), out_(path), width_(header.size()) {
  if (!out_) throw std::runtime_error("CsvFile: cannot open " + path_);
  if (width_ == 0) throw std::invalid_argument("CsvFile: empty header");
  write(header);
}

void CsvFile::write(const std::vector<std::string>& cells) {
  if (cells.size() != width_)
    throw std::invalid_argument("CsvFile: wrong column count for " + path_);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
  if (!out_) throw std::runtime_error("CsvFile: write failed for " + path_);
}

void CsvFile::close() {
  if (closed_) return;
  closed_ = true;
  out_.flush();
  if (!out_) throw std::runtime_error("CsvFile: flush failed for " + path_);
  out_.close();
}

CsvFile::~CsvFile() {
  try {
    close();
  } catch (...) {
    // Destructors must not throw; close() explicitly to observe flush failures.
  }
}

HistogramFile read_histogram_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_histogram_csv: cannot open " + path);
  HistogramFile out;
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b))
      throw std::runtime_error("read_histogram_csv: expected two columns at " + path + ":" +
                               std::to_string(line_no));
    char* end = nullptr;
    const double center = std::strtod(a.c_str(), &end);
    if (first && end == a.c_str()) {
      first = false;  // header line
      continue;
    }
    first = false;
    if (end == a.c_str())
      throw std::runtime_error("read_histogram_csv: bad bin center at " + path + ":" +
                               std::to_string(line_no));
    const double count = std::strtod(b.c_str(), &end);
    if (end == b.c_str() || count < 0.0 || count != std::floor(count))
      throw std::runtime_error("read_histogram_csv: bad count at " + path + ":" +
                               std::to_string(line_no));
    out.centers.push_back(center);
    out.counts.push_back(static_cast<std::int64_t>(count));
  }
  if (out.centers.size() < 2)
    throw InsufficientDataError("read_histogram_csv: need at least two bins in " + path);
  out.t_bin = out.centers[1] - out.centers[0];
  if (!(out.t_bin > 0.0))
    throw std::runtime_error("read_histogram_csv: centers not ascending in " + path);
  for (std::size_t i = 1; i < out.centers.size(); ++i) {
    const double gap = out.centers[i] - out.centers[i - 1];
    if (std::abs(gap - out.t_bin) > 1e-9 * out.t_bin)
      throw std::runtime_error("read_histogram_csv: non-uniform bin spacing in " + path);
  }
  out.t_r = out.t_bin * static_cast<double>(out.centers.size());
  return out;
}

double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("tv_distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

std::vector<double> coarsen_masses(const std::vector<double>& mass, int n_coarse) {
  if (n_coarse <= 0) throw std::invalid_argument("coarsen_masses: n_coarse must be positive");
  const std::size_t n = mass.size();
  if (n == 0 || n % static_cast<std::size_t>(n_coarse) != 0)
    throw std::invalid_argument("coarsen_masses: length not a multiple of n_coarse");
  const std::size_t factor = n / static_cast<std::size_t>(n_coarse);
  std::vector<double> out(static_cast<std::size_t>(n_coarse), 0.0);
  for (std::size_t i = 0; i < n; ++i) out[i / factor] += mass[i];
  return out;
}

std::vector<double> density_to_masses(const std::vector<double>& pdf, double t_bin) {
  if (!(t_bin > 0.0)) throw std::invalid_argument("density_to_masses: bad bin width");
  std::vector<double> m(pdf.size());
  for (std::size_t i = 0; i < pdf.size(); ++i) m[i] = pdf[i] * t_bin;
  return m;
}

std::vector<double> counts_to_masses(const std::vector<std::int64_t>& counts) {
  double total = 0.0;
  for (std::int64_t c : counts) total += static_cast<double>(c);
  if (!(total > 0.0)) throw InsufficientDataError("counts_to_masses: empty histogram");
  std::vector<double> m(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    m[i] = static_cast<double>(counts[i]) / total;
  return m;
}

}  // namespace deadtime
