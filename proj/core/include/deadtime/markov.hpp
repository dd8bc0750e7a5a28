#pragma once

#include <cstdint>
#include <vector>

#include "deadtime/model.hpp"

namespace deadtime {

// Transition density of the detection-phase Markov chain: given the previous
// detection at phase x_prev (in [0, t_r)), the density of the next detection phase
// at x_next. The detector re-arms x_d = t_d mod t_r after a detection; the missing
// geometric factor over empty periods is folded in closed form.
double transition_pdf(const SceneModel& model, double x_prev, double x_next);

// Row-stochastic discretization of the transition density on a bin grid.
//
// dense      : explicit row-major matrix, entries proportional to
//              transition_pdf(center(m), center(n)), rows normalized to sum 1.
// matrix_free: O(n_b) storage; left application in O(n_b log n_b) using the rank
//              structure of the kernel. The density factorizes into a destination
//              factor lambda(x) e^{-L(x)} (L = cumulative intensity from 0), a source
//              factor e^{+L(y + x_d)}, and a factor e^{-K Lambda} where the period
//              count K in {0,1,2} splits the grid at one threshold per row/column.
//              Prefix sums over each K-segment give the product without forming P.
class TransitionKernel {
 public:
  enum class Mode { dense, matrix_free };

  static constexpr int kDefaultDenseCap = 4096;

  // Diagnostic constructor from an explicit matrix (row-major, n_b x n_b); rows are
  // renormalized. Used by tests and spectral diagnostics on synthetic chains.
  TransitionKernel(const BinGrid& grid, std::vector<double> row_major);

  Mode mode() const { return mode_; }
  const BinGrid& grid() const { return grid_; }
  bool has_model() const { return has_model_; }
  const SceneModel& model() const { return model_; }

  // Row-major row-normalized matrix; throws UnsupportedModeError in matrix-free mode.
  const std::vector<double>& dense_matrix() const;

  // Returns v^T P for a length-n_b vector v.
  std::vector<double> apply_left(const std::vector<double>& v) const;

 private:
  friend TransitionKernel build_kernel(const SceneModel&, const BinGrid&,
                                       TransitionKernel::Mode, int);
  TransitionKernel() = default;

  static constexpr int kSourceNodes = 3;  // Gauss-Legendre nodes per source bin

  std::vector<double> apply_left_dense(const std::vector<double>& v) const;
  std::vector<double> apply_left_model(const std::vector<double>& v) const;

  Mode mode_ = Mode::dense;
  BinGrid grid_;
  SceneModel model_;
  bool has_model_ = false;

  std::vector<double> matrix_;  // dense mode

  // Model-built kernels (either mode) precompute, per source bin, kSourceNodes
  // sub-sources: the intensity-weighted node weight, the same weight scaled by
  // exp(+integral of lambda from 0 to the node's dead-end phase), and the dead-end
  // bin index. Destination-bin masses then follow in closed form from the survival
  // weights wl_[e] = exp(-integral of lambda from 0 to edge e).
  std::vector<double> sub_w_;   // node weight * e^{+F(dead end)}
  std::vector<double> ind_w_;   // node weight (mass of the dead-end bin itself)
  std::vector<int> sub_j_;      // dead-end bin index per node
  std::vector<double> wl_;      // survival weight at bin edges, size n_b + 1
  double exp_neg_flux_ = 0.0;
};

// Builds the discretized kernel. Dense mode refuses grids larger than dense_cap
// (CapacityError) to keep memory bounded; use matrix-free above it. Throws
// DegenerateModelError when the scene's total flux is zero.
TransitionKernel build_kernel(const SceneModel& model, const BinGrid& grid,
                              TransitionKernel::Mode mode,
                              int dense_cap = TransitionKernel::kDefaultDenseCap);

struct StationaryResult {
  std::vector<double> pdf;  // stationary detection-phase density (1/ns), sums to 1/t_bin
  double gap = 0.0;         // estimated spectral gap 1 - |lambda_2| from contraction rate
  long iterations = 0;
  double residual = 0.0;    // final l1 change between successive mass iterates
};

// Power iteration for the stationary distribution of the chain. Iterates per-bin
// probability masses; pdf is those masses divided by t_bin (a bin-averaged density).
// Model-built kernels integrate the transition density exactly over destination
// bins, so with a whole-period dead time (x_d = 0) the fixed point reproduces the
// exact per-bin arrival masses to solver tolerance at any n_b. Throws
// ConvergenceError (with last residual) if max_iter is hit.
StationaryResult stationary_distribution(const TransitionKernel& kernel, double tol = 1e-10,
                                         long max_iter = 100000);

// Exact spectral gap 1 - |lambda_2| via dense eigendecomposition (diagnostic scale).
// Throws UnsupportedModeError for matrix-free kernels.
double spectral_gap(const TransitionKernel& kernel);

enum class DensityKind { arrival, detection };

// Fisher information (1/ns^2) for the pulse delay carried by one arrival (or
// detection) phase, via a grid-aligned central difference of the per-bin masses in
// the delay: the shift is snapped to a whole number of bins (at least one), which
// keeps the differencing exact under the circular shift equivariance of both
// densities. Both kinds use the same bin-mass convention (exact arrival-bin
// integrals vs the stationary masses) so they agree when x_d = 0. Masses are
// floored at 1e-12 inside the quotient.
double fisher_information(const SceneModel& model, const BinGrid& grid, DensityKind kind,
                          double delta_tau = -1.0);

}  // namespace deadtime
