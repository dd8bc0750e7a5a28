#include "deadtime/markov.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "deadtime/errors.hpp"

namespace deadtime {
namespace {

double cumulative_from_zero(const SceneModel& model, double x) {
  return cumulative_intensity(model, 0.0, x);
}

}  // namespace

double transition_pdf(const SceneModel& model, double x_prev, double x_next) {
  model.validate();
  const double flux = model.total_flux();
  if (!(flux > 0.0)) throw DegenerateModelError("transition_pdf: total flux is zero");
  if (!(x_prev >= 0.0) || !(x_prev < model.t_r) || !(x_next >= 0.0) || !(x_next < model.t_r))
    throw std::invalid_argument("transition_pdf: phases must lie in [0, t_r)");
  const double x_d = model.x_d();
  // Number of period boundaries skipped; floor(.)+1 so a zero gap means waiting a
  // full period rather than an instantaneous retrigger.
  const double k = std::floor((x_prev + x_d - x_next) / model.t_r) + 1.0;
  const double lo = x_prev + x_d;
  const double hi = k * model.t_r + x_next;
  const double survival = std::exp(-cumulative_intensity(model, lo, hi));
  return intensity_at(model, x_next) / (1.0 - std::exp(-flux)) * survival;
}

TransitionKernel::TransitionKernel(const BinGrid& grid, std::vector<double> row_major)
    : mode_(Mode::dense), grid_(grid), matrix_(std::move(row_major)) {
  const std::size_t n = static_cast<std::size_t>(grid.n_b);
  if (matrix_.size() != n * n)
    throw std::invalid_argument("TransitionKernel: matrix size must be n_b * n_b");
  for (std::size_t m = 0; m < n; ++m) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += matrix_[m * n + j];
    if (!(s > 0.0)) throw std::invalid_argument("TransitionKernel: row sums must be positive");
    for (std::size_t j = 0; j < n; ++j) matrix_[m * n + j] /= s;
  }
}

const std::vector<double>& TransitionKernel::dense_matrix() const {
  if (mode_ != Mode::dense)
    throw UnsupportedModeError("dense_matrix: kernel is matrix-free");
  return matrix_;
}

TransitionKernel build_kernel(const SceneModel& model, const BinGrid& grid,
                              TransitionKernel::Mode mode, int dense_cap) {
  model.validate();
  const double flux = model.total_flux();
  if (!(flux > 0.0)) throw DegenerateModelError("build_kernel: total flux is zero");
  const int n_b = grid.n_b;
  if (mode == TransitionKernel::Mode::dense && n_b > dense_cap)
    throw CapacityError("build_kernel: dense mode capped at " + std::to_string(dense_cap) +
                        " bins; use matrix-free");

  TransitionKernel k;
  k.mode_ = mode;
  k.grid_ = grid;
  k.model_ = model;
  k.has_model_ = true;
  k.exp_neg_flux_ = std::exp(-flux);
  const double x_d = model.x_d();

  // Survival weight exp(-F) at every bin edge; F(y) = integral of lambda over [0, y].
  // The probability that the first arrival after a dead end at z lands in [a, b) is
  // (wl(a) - wl(b)) e^{F(z)} (with one extra factor e^{-flux} per period wrapped),
  // so destination-bin masses need no quadrature at all.
  k.wl_.resize(static_cast<std::size_t>(n_b) + 1);
  for (int e = 0; e < n_b; ++e)
    k.wl_[static_cast<std::size_t>(e)] = std::exp(-cumulative_from_zero(model, grid.left_edge(e)));
  k.wl_[static_cast<std::size_t>(n_b)] = k.exp_neg_flux_;

  // Within each source bin, detections are weighted by the arrival intensity (the
  // exact within-bin law when x_d = 0, and its leading-order shape otherwise),
  // sampled at Gauss-Legendre nodes.
  constexpr int q = TransitionKernel::kSourceNodes;
  constexpr double kNode[q] = {-0.7745966692414834, 0.0, 0.7745966692414834};
  constexpr double kWeight[q] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  k.sub_w_.resize(static_cast<std::size_t>(n_b) * q);
  k.ind_w_.resize(static_cast<std::size_t>(n_b) * q);
  k.sub_j_.resize(static_cast<std::size_t>(n_b) * q);
  const double half = 0.5 * grid.t_bin;
  for (int m = 0; m < n_b; ++m) {
    const double c = grid.center(m);
    double raw[q];
    double norm = 0.0;
    for (int s = 0; s < q; ++s) {
      raw[s] = kWeight[s] * intensity_at(model, c + half * kNode[s]);
      norm += raw[s];
    }
    for (int s = 0; s < q; ++s) {
      const double w = raw[s] / norm;
      const double z = pmod(c + half * kNode[s] + x_d, grid.t_r);
      const std::size_t idx = static_cast<std::size_t>(m) * q + static_cast<std::size_t>(s);
      k.ind_w_[idx] = w;
      k.sub_w_[idx] = w * std::exp(cumulative_from_zero(model, z));
      k.sub_j_[idx] = std::min(n_b - 1, static_cast<int>(z / grid.t_bin));
    }
  }

  if (mode == TransitionKernel::Mode::dense) {
    k.matrix_.resize(static_cast<std::size_t>(n_b) * n_b);
    std::vector<double> unit(static_cast<std::size_t>(n_b), 0.0);
    for (int m = 0; m < n_b; ++m) {
      unit[static_cast<std::size_t>(m)] = 1.0;
      const std::vector<double> row = k.apply_left_model(unit);
      unit[static_cast<std::size_t>(m)] = 0.0;
      double row_sum = 0.0;
      for (double v : row) row_sum += v;
      double* out = &k.matrix_[static_cast<std::size_t>(m) * n_b];
      for (int n = 0; n < n_b; ++n) out[n] = row[static_cast<std::size_t>(n)] / row_sum;
    }
  }
  return k;
}

std::vector<double> TransitionKernel::apply_left_dense(const std::vector<double>& v) const {
  const int n_b = grid_.n_b;
  std::vector<double> out(n_b, 0.0);
  for (int m = 0; m < n_b; ++m) {
    const double vm = v[m];
    if (vm == 0.0) continue;
    const double* row = &matrix_[static_cast<std::size_t>(m) * n_b];
    for (int n = 0; n < n_b; ++n) out[n] += vm * row[n];
  }
  return out;
}

std::vector<double> TransitionKernel::apply_left_model(const std::vector<double>& v) const {
  const int n_b = grid_.n_b;
  const double e1 = exp_neg_flux_;
  constexpr int q = kSourceNodes;
  // Group the weighted sub-sources by dead-end bin. A destination bin [L_n, L_{n+1})
  // receives (wl(L_n) g_n - wl(L_{n+1}) g_{n+1}) / (1 - e^{-flux}) where the edge
  // factor g_e folds one wrap factor e^{-flux} into every sub-source whose dead end
  // lies at or past the edge; dead-end bins additionally collect their own weight.
  std::vector<double> by_bin(static_cast<std::size_t>(n_b), 0.0);
  std::vector<double> self(static_cast<std::size_t>(n_b), 0.0);
  for (int m = 0; m < n_b; ++m) {
    const double vm = v[static_cast<std::size_t>(m)];
    if (vm == 0.0) continue;
    const std::size_t base = static_cast<std::size_t>(m) * q;
    for (int s = 0; s < q; ++s) {
      const std::size_t j = static_cast<std::size_t>(sub_j_[base + static_cast<std::size_t>(s)]);
      by_bin[j] += vm * sub_w_[base + static_cast<std::size_t>(s)];
      self[j] += vm * ind_w_[base + static_cast<std::size_t>(s)];
    }
  }
  std::vector<double> edge(static_cast<std::size_t>(n_b) + 1);
  double behind = 0.0;  // total sub-source weight with dead end strictly before edge e
  double total = 0.0;
  for (double u : by_bin) total += u;
  for (int e = 0; e <= n_b; ++e) {
    edge[static_cast<std::size_t>(e)] = behind + e1 * (total - behind);
    if (e < n_b) behind += by_bin[static_cast<std::size_t>(e)];
  }
  std::vector<double> out(static_cast<std::size_t>(n_b));
  const double inv = 1.0 / (1.0 - e1);
  for (int n = 0; n < n_b; ++n) {
    out[static_cast<std::size_t>(n)] =
        (wl_[static_cast<std::size_t>(n)] * edge[static_cast<std::size_t>(n)] -
         wl_[static_cast<std::size_t>(n) + 1] * edge[static_cast<std::size_t>(n) + 1]) *
            inv +
        self[static_cast<std::size_t>(n)];
  }
  return out;
}

std::vector<double> TransitionKernel::apply_left(const std::vector<double>& v) const {
  if (v.size() != static_cast<std::size_t>(grid_.n_b))
    throw std::invalid_argument("apply_left: vector length must equal n_b");
  return mode_ == Mode::dense ? apply_left_dense(v) : apply_left_model(v);
}

StationaryResult stationary_distribution(const TransitionKernel& kernel, double tol,
                                         long max_iter) {
  const int n_b = kernel.grid().n_b;
  const double t_bin = kernel.grid().t_bin;
  std::vector<double> p(n_b, 1.0 / n_b);
  double diff = 0.0, prev_diff = 0.0, rate = 0.0;
  long it = 0;
  for (; it < max_iter; ++it) {
    std::vector<double> q = kernel.apply_left(p);
    double mass = 0.0;
    for (double x : q) mass += x;
    for (double& x : q) x /= mass;
    diff = 0.0;
    for (int i = 0; i < n_b; ++i) diff += std::abs(q[i] - p[i]);
    p.swap(q);
    if (prev_diff > 0.0 && diff > 0.0) rate = diff / prev_diff;
    prev_diff = diff;
    if (diff < tol) break;
  }
  if (it >= max_iter)
    throw ConvergenceError("stationary_distribution: power iteration did not converge", diff,
                           it);

  StationaryResult res;
  res.iterations = it + 1;
  res.residual = diff;
  res.gap = std::clamp(1.0 - rate, 0.0, 1.0);
  res.pdf.resize(n_b);
  std::copy(p.begin(), p.end(), res.pdf.begin());
  double mass = 0.0;
  for (double x : res.pdf) mass += x;
  mass *= t_bin;
  for (double& x : res.pdf) x /= mass;
  return res;
}

double spectral_gap(const TransitionKernel& kernel) {
  if (kernel.mode() != TransitionKernel::Mode::dense)
    throw UnsupportedModeError("spectral_gap: requires a dense kernel");
  const int n = kernel.grid().n_b;
  if (n == 1) return 1.0;
  Eigen::MatrixXd a(n, n);
  const auto& m = kernel.dense_matrix();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = m[static_cast<std::size_t>(r) * n + c];
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, /*computeEigenvectors=*/false);
  std::vector<double> mags(n);
  for (int i = 0; i < n; ++i) mags[i] = std::abs(solver.eigenvalues()[i]);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  if (std::abs(mags[0] - 1.0) > 1e-6)
    throw std::runtime_error("spectral_gap: leading eigenvalue is not 1 (got " +
                             std::to_string(mags[0]) + ")");
  return 1.0 - mags[1];
}

double fisher_information(const SceneModel& model, const BinGrid& grid, DensityKind kind,
                          double delta_tau) {
  const double t_bin = grid.t_bin;
  long shift = delta_tau > 0.0 ? std::llround(delta_tau / t_bin) : 1;
  if (shift < 1) shift = 1;
  const double delta = static_cast<double>(shift) * t_bin;
  const int n_b = grid.n_b;

  std::vector<double> f(static_cast<std::size_t>(n_b));
  if (kind == DensityKind::arrival) {
    const double flux = model.total_flux();
    if (!(flux > 0.0))
      throw DegenerateModelError("fisher_information: total flux is zero");
    for (int i = 0; i < n_b; ++i) {
      const double left = grid.left_edge(i);
      f[static_cast<std::size_t>(i)] =
          cumulative_intensity(model, left, left + t_bin) / flux;
    }
  } else {
    const auto kernel = build_kernel(model, grid, TransitionKernel::Mode::matrix_free);
    const std::vector<double> pdf = stationary_distribution(kernel).pdf;
    for (int i = 0; i < n_b; ++i) f[static_cast<std::size_t>(i)] = pdf[static_cast<std::size_t>(i)] * t_bin;
  }
  const int s = static_cast<int>(shift % n_b);
  constexpr double kFloor = 1e-12;
  double info = 0.0;
  for (int i = 0; i < n_b; ++i) {
    // Delay +delta moves the density right: f_{tau+delta}(b_i) = f(b_{i-s}).
    const double plus = f[(i - s + n_b) % n_b];
    const double minus = f[(i + s) % n_b];
    const double slope = (plus - minus) / (2.0 * delta);
    info += slope * slope / std::max(f[i], kFloor);
  }
  return info;
}

}  // namespace deadtime
