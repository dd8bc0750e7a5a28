#include "deadtime/correction.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>

#include "deadtime/errors.hpp"

namespace deadtime {

namespace {

double vec_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<double> gate_vector(const std::vector<double>& h, int n_d) {
  const int n_b = static_cast<int>(h.size());
  if (n_b == 0) throw std::invalid_argument("gate_vector: empty histogram");
  if (n_d < 0 || n_d >= n_b)
    throw std::invalid_argument("gate_vector: window length out of range");
  std::vector<double> g(static_cast<std::size_t>(n_b), 0.0);
  if (n_d == 0) return g;
  // Running circular window; rebuild the sum directly since n_d is modest and a
  // rolling update would accumulate roundoff over thousands of bins.
  for (int i = 0; i < n_b; ++i) {
    double s = 0.0;
    for (int j = 1; j <= n_d; ++j) s += h[static_cast<std::size_t>((i - j + n_b) % n_b)];
    g[static_cast<std::size_t>(i)] = s;
  }
  return g;
}

FixedPointInit init_fixed_point(const std::vector<double>& h, const std::vector<double>& g,
                                double flux) {
  if (h.size() != g.size() || h.empty())
    throw std::invalid_argument("init_fixed_point: size mismatch");
  if (!(flux > 0.0)) throw std::invalid_argument("init_fixed_point: flux must be positive");

  const std::size_t n = h.size();
  FixedPointInit out;

  // Only bins with mass constrain feasibility; empty bins get lambda0 = 0 anyway.
  double g_eff = 0.0;
  bool any_mass = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (h[i] > 0.0) {
      any_mass = true;
      g_eff = std::max(g_eff, g[i]);
    }
  }
  if (!any_mass) throw DegenerateModelError("init_fixed_point: histogram has no mass");

  const auto rhs = [&](double c) {
    double s = 0.0;
    const double inv_den_base = (1.0 + c) / flux;
    for (std::size_t i = 0; i < n; ++i) {
      if (h[i] <= 0.0) continue;
      s += h[i] * g[i] / (inv_den_base - g[i]);
    }
    return s;
  };
  const auto phi = [&](double c) { return c - rhs(c); };

  const double boundary = flux * g_eff - 1.0;  // feasible iff c > boundary
  bool ok = false;
  double lo = 0.0, hi = 0.0;
  if (boundary < 0.0) {
    lo = 0.0;  // phi(0) = -rhs(0) <= 0
    ok = true;
  } else {
    // Walk toward the pole until the sum dominates.
    double off = std::max(1e-12, 1e-12 * boundary);
    for (int tries = 0; tries < 60; ++tries) {
      if (phi(boundary + off) <= 0.0) {
        lo = boundary + off;
        ok = true;
        break;
      }
      off *= 0.0625;
      if (off < 1e-250) break;
    }
  }
  if (ok) {
    hi = std::max(lo + 1.0, 2.0 * lo);
    bool bracketed = false;
    for (int tries = 0; tries < 300; ++tries) {
      if (phi(hi) > 0.0) {
        bracketed = true;
        break;
      }
      hi = boundary + 2.0 * (hi - boundary) + 1.0;
      if (!std::isfinite(hi)) break;
    }
    ok = bracketed;
  }

  if (!ok) {
    out.fallback = true;
    out.c_hat = 0.0;
    out.lambda0.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.lambda0[i] = flux * h[i];
    return out;
  }

  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (phi(mid) <= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  out.c_hat = 0.5 * (lo + hi);
  out.lambda0.resize(n, 0.0);
  const double base = (1.0 + out.c_hat) / flux;
  for (std::size_t i = 0; i < n; ++i) {
    if (h[i] > 0.0) out.lambda0[i] = h[i] / (base - g[i]);
  }
  return out;
}

InverseProblem make_inverse_problem(const std::vector<double>& h, double flux,
                                    const BinGrid& grid) {
  if (static_cast<int>(h.size()) != grid.n_b)
    throw std::invalid_argument("make_inverse_problem: histogram does not match grid");
  if (!(flux > 0.0))
    throw std::invalid_argument("make_inverse_problem: flux must be positive");
  double sum = 0.0;
  for (double x : h) {
    if (!(x >= 0.0)) throw std::invalid_argument("make_inverse_problem: negative bin mass");
    sum += x;
  }
  if (!(sum > 0.0)) throw DegenerateModelError("make_inverse_problem: histogram has no mass");
  if (std::abs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("make_inverse_problem: histogram must be normalized");

  InverseProblem p;
  p.grid = grid;
  p.flux = flux;
  p.h = h;
  for (double& x : p.h) x /= sum;
  p.g = gate_vector(p.h, grid.n_d);

  FixedPointInit init = init_fixed_point(p.h, p.g, flux);
  p.init_fallback = init.fallback;
  p.lambda0 = std::move(init.lambda0);
  double peak = 0.0;
  for (double x : p.lambda0) peak = std::max(peak, x);
  if (!(peak > 0.0))
    throw DegenerateModelError("make_inverse_problem: degenerate initialization");
  p.box_max = 10.0 * peak;
  for (double& x : p.lambda0) x = std::clamp(x, 0.0, p.box_max);
  return p;
}

std::vector<double> forward_operator(const InverseProblem& p,
                                     const std::vector<double>& lambda) {
  if (lambda.size() != p.h.size())
    throw std::invalid_argument("forward_operator: size mismatch");
  const double coupling = dot(p.g, lambda) / p.flux;
  std::vector<double> t(lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i)
    t[i] = lambda[i] * (1.0 / p.flux - p.g[i] + coupling);
  return t;
}

double objective(const InverseProblem& p, const std::vector<double>& lambda) {
  const std::vector<double> t = forward_operator(p, lambda);
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double d = p.h[i] - t[i];
    s += d * d;
  }
  return 0.5 * s;
}

std::vector<double> gradient(const InverseProblem& p, const std::vector<double>& lambda) {
  const std::size_t n = lambda.size();
  if (n != p.h.size()) throw std::invalid_argument("gradient: size mismatch");
  const std::vector<double> t = forward_operator(p, lambda);
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = t[i] - p.h[i];
  const double lr = dot(lambda, r);
  const double gl = dot(p.g, lambda);
  const double diag = (1.0 + gl) / p.flux;
  std::vector<double> grad(n);
  for (std::size_t i = 0; i < n; ++i)
    grad[i] = p.g[i] * lr / p.flux + diag * r[i] - p.g[i] * r[i];
  return grad;
}

double lipschitz_bound(int n_b, double box_max, double flux) {
  if (n_b <= 0 || !(box_max >= 0.0) || !(flux > 0.0))
    throw std::invalid_argument("lipschitz_bound: bad arguments");
  const double inv = 1.0 / flux;
  const double root_nb = std::sqrt(static_cast<double>(n_b));
  return 2.0 * inv * inv * n_b * box_max * box_max +
         (2.0 * inv * inv + 2.0 + 6.0 * inv) * root_nb * box_max + 4.0 * inv + 2.0;
}

CorrectionResult solve_mchc(const InverseProblem& p, double tol, long max_iter) {
  const std::size_t n = p.h.size();
  if (p.lambda0.size() != n || p.g.size() != n)
    throw std::invalid_argument("solve_mchc: malformed problem");
  if (!(tol >= 0.0) || max_iter < 1)
    throw std::invalid_argument("solve_mchc: bad solver settings");

  const double step = 1.0 / lipschitz_bound(p.grid.n_b, p.box_max, p.flux);
  const auto project = [&](std::vector<double>& v) {
    for (double& x : v) x = std::clamp(x, 0.0, p.box_max);
  };
  const auto stepped = [&](const std::vector<double>& v) {
    const std::vector<double> grad = gradient(p, v);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = v[i] - step * grad[i];
    project(out);
    return out;
  };

  std::vector<double> lam = p.lambda0;
  project(lam);
  std::vector<double> lam_prev = lam;
  std::vector<double> z = lam;
  double q_prev = 0.0, q = 1.0;

  CorrectionResult res;
  double f_cur = objective(p, lam);
  res.objective_trace.push_back(f_cur);
  res.termination = "max_iter";

  std::vector<double> y(n);
  for (long k = 1; k <= max_iter; ++k) {
    const double a = q_prev / q;
    const double b = (q_prev - 1.0) / q;
    for (std::size_t i = 0; i < n; ++i)
      y[i] = lam[i] + a * (z[i] - lam[i]) + b * (lam[i] - lam_prev[i]);

    std::vector<double> z_next = stepped(y);
    std::vector<double> x_next = stepped(lam);
    const double fz = objective(p, z_next);
    const double fx = objective(p, x_next);

    lam_prev = lam;
    double f_next;
    if (fz <= fx && fz <= f_cur) {
      lam = z_next;
      f_next = fz;
    } else if (fx <= f_cur) {
      lam = std::move(x_next);
      f_next = fx;
    } else {
      // Neither candidate improves (possible only from floating-point rounding
      // once the objective has bottomed out); keep the incumbent so the trace
      // never increases.
      f_next = f_cur;
    }
    z = std::move(z_next);

    const double q_next = 0.5 * (std::sqrt(4.0 * q * q + 1.0) + 1.0);
    q_prev = q;
    q = q_next;

    res.objective_trace.push_back(f_next);
    res.iterations = k;
    const double rel = std::abs(f_next - f_cur) / std::max(f_cur, 1e-300);
    f_cur = f_next;
    if (rel < tol) {
      res.termination = "converged";
      break;
    }
  }
  res.lambda_hat = std::move(lam);
  res.final_objective = f_cur;
  return res;
}

std::vector<double> corrected_histogram(const CorrectionResult& result) {
  const double s = vec_sum(result.lambda_hat);
  if (!(s > 0.0))
    throw DegenerateModelError("corrected_histogram: recovered arrivals sum to zero");
  std::vector<double> h = result.lambda_hat;
  for (double& x : h) x /= s;
  return h;
}

}  // namespace deadtime
