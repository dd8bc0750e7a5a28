#pragma once

#include <string>
#include <vector>

#include "deadtime/model.hpp"

namespace deadtime {

// Circular trailing-window sums: g_i = sum of the n_d histogram bins preceding bin i
// (wrapping around the period). g_i is the fraction of detections that land inside
// the dead window covering bin i.
std::vector<double> gate_vector(const std::vector<double>& h, int n_d);

struct FixedPointInit {
  std::vector<double> lambda0;
  double c_hat = 0.0;    // stationary gate constant
  bool fallback = false; // true when the scalar fixed point was infeasible
};

// Initializes the inversion at the stationary-balance fixed point: solves
// C = sum_i h_i g_i / ((1 + C) / flux - g_i) by bisection on the feasible interval
// (the left side is increasing, the right side decreasing, so the root is unique),
// then lambda0_i = h_i / ((1 + C) / flux - g_i). Falls back to lambda0 = flux * h
// when no feasible root exists.
FixedPointInit init_fixed_point(const std::vector<double>& h, const std::vector<double>& g,
                                double flux);

// One inversion instance: recover per-bin expected arrivals lambda (sum approx flux)
// from a normalized detection histogram h under the stationary detection balance.
struct InverseProblem {
  BinGrid grid;
  std::vector<double> h;        // normalized histogram, sums to 1
  std::vector<double> g;        // gate vector for grid.n_d
  double flux = 0.0;            // total arrivals per period (Lambda)
  double box_max = 0.0;         // per-bin upper bound M of the feasible box
  std::vector<double> lambda0;  // initial iterate, clipped to [0, box_max]
  bool init_fallback = false;
};

// Builds the problem from a normalized histogram; box_max = 10 * max(lambda0).
InverseProblem make_inverse_problem(const std::vector<double>& h, double flux,
                                    const BinGrid& grid);

// Stationary balance map: T(lambda) = -g.*lambda + lambda/flux + (g'lambda) lambda/flux.
// At the true arrival vector, T(lambda) reproduces the detection histogram.
std::vector<double> forward_operator(const InverseProblem& p, const std::vector<double>& lambda);

// Least-squares data misfit D(lambda) = 0.5 ||h - T(lambda)||^2 and its gradient
// J(lambda)' (T(lambda) - h).
double objective(const InverseProblem& p, const std::vector<double>& lambda);
std::vector<double> gradient(const InverseProblem& p, const std::vector<double>& lambda);

// Global Lipschitz majorant for the gradient over the box [0, M]^n_b; the solver
// steps with 1/L. Valid as a certificate when the gate vector has euclidean norm
// at most 1; real problems stay far inside the bound near their iterates.
double lipschitz_bound(int n_b, double box_max, double flux);

struct CorrectionResult {
  std::vector<double> lambda_hat;
  std::vector<double> objective_trace;  // D at each accepted iterate, non-increasing
  long iterations = 0;
  double final_objective = 0.0;
  std::string termination;  // "converged" or "max_iter"
};

// Monotone accelerated projected-gradient descent on D over the box. Two candidate
// steps per iteration (one from the extrapolated point, one plain) and the better
// objective wins, which keeps the trace non-increasing while retaining acceleration.
// Stops when the relative objective change drops below tol.
CorrectionResult solve_mchc(const InverseProblem& p, double tol = 1e-10,
                            long max_iter = 50000);

// Normalizes the recovered arrival vector into a corrected arrival histogram.
std::vector<double> corrected_histogram(const CorrectionResult& result);

}  // namespace deadtime
