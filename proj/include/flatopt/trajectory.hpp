#pragma once

// Backward error analysis: discrete SAM / expected-MFVI iterates against
// (a) gradient flow on L and (b) gradient flow on the modified loss that
// finite-step descent is predicted to follow.
//
//   SAM : L + sqrt(p)|g|_Sigma + delta/4 |g|^2
//   MFVI: L + delta/4 |g|^2 + delta/4 Tr[Sigma H^2]
//
// For SAM the intermediate form E + delta/4 |grad E|^2 with
// E = L + sqrt(p)|g|_Sigma is tracked as well.

#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "flatopt/core_math.hpp"
#include "flatopt/objective.hpp"
#include "flatopt/optimizer.hpp"

namespace flatopt {

enum class TrajectoryKind { Sam, ExpectedMfvi };

struct TrajectoryOptions {
  std::size_t mc_draws = 1000;  // per expected-MFVI step, as antithetic pairs
  double tolerance = 1e-10;     // integrator absolute and relative tolerance
  std::uint64_t seed = 1;
};

struct TrajectoryDeviation {
  double from_original = 0.0;
  double from_modified = 0.0;
  double from_intermediate = 0.0;  // SAM only; equals from_modified for MFVI
};

namespace detail {

enum class Flow { Original, Modified, Intermediate };

inline Vec flow_gradient(Flow flow, TrajectoryKind kind, const Objective& f, std::span<const double> mu,
                         std::span<const double> sigma, double delta) {
  const std::size_t p = mu.size();
  Vec g = f.gradient(mu);
  if (flow == Flow::Original) return g;
  const Matrix h = f.hessian(mu);
  const Vec hg = h.apply(g);

  if (kind == TrajectoryKind::ExpectedMfvi) {
    Vec out = g;
    vec::axpy(0.5 * delta, hg, out);
    // d/dmu Tr[Sigma H(mu)^2] by central differences; zero on quadratics.
    Vec probe(mu.begin(), mu.end());
    for (std::size_t j = 0; j < p; ++j) {
      const double step = 1e-4 * (1.0 + std::abs(mu[j]));
      probe[j] = mu[j] + step;
      const double tp = trace_sigma_h2(sigma, f.hessian(probe));
      probe[j] = mu[j] - step;
      const double tm = trace_sigma_h2(sigma, f.hessian(probe));
      probe[j] = mu[j];
      out[j] += 0.25 * delta * (tp - tm) / (2.0 * step);
    }
    return out;
  }

  // SAM: grad E = g + sqrt(p) H Sigma g / |g|_Sigma
  Vec u(p);
  for (std::size_t i = 0; i < p; ++i) u[i] = sigma[i] * g[i];
  const double n = std::sqrt(vec::dot(u, g));
  const double sp = std::sqrt(static_cast<double>(p));
  Vec grad_e = g;
  const bool degenerate = !(n >= kDegenerateGradNorm);
  if (!degenerate) vec::axpy(sp / n, h.apply(u), grad_e);

  if (flow == Flow::Modified) {
    vec::axpy(0.5 * delta, hg, grad_e);
    return grad_e;
  }
  // Intermediate: grad E + delta/2 J(grad E) grad E, with
  // J = H + sqrt(p)/n H (Sigma - u u^T / n^2) H (third derivatives dropped).
  Vec jv = h.apply(grad_e);
  if (!degenerate) {
    const Vec hv = h.apply(grad_e);
    Vec inner(p);
    const double uhv = vec::dot(u, hv);
    for (std::size_t i = 0; i < p; ++i) inner[i] = sigma[i] * hv[i] - u[i] * uhv / (n * n);
    vec::axpy(sp / n, h.apply(inner), jv);
  }
  vec::axpy(0.5 * delta, jv, grad_e);
  return grad_e;
}

inline std::vector<Vec> integrate_flow(Flow flow, TrajectoryKind kind, const Objective& f, std::span<const double> mu0,
                                       std::span<const double> sigma, double delta, std::size_t steps,
                                       double tolerance) {
  namespace odeint = boost::numeric::odeint;
  std::vector<double> times(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) times[k] = delta * static_cast<double>(k);
  std::vector<Vec> path;
  path.reserve(steps + 1);
  Vec x(mu0.begin(), mu0.end());
  auto rhs = [&](const Vec& state, Vec& dxdt, double) {
    Vec g = flow_gradient(flow, kind, f, state, sigma, delta);
    dxdt.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) dxdt[i] = -g[i];
  };
  auto observer = [&](const Vec& state, double) { path.push_back(state); };
  try {
    auto stepper = odeint::make_dense_output(tolerance, tolerance, odeint::runge_kutta_dopri5<Vec>());
    odeint::integrate_times(stepper, rhs, x, times.begin(), times.end(), delta / 10.0, observer,
                            odeint::max_step_checker(100000));
  } catch (const odeint::odeint_error& e) {
    throw Error(ErrorKind::IntegratorFailure, e.what());
  }
  if (path.size() != steps + 1) throw Error(ErrorKind::IntegratorFailure, "integrator skipped observation times");
  return path;
}

inline std::vector<Vec> discrete_iterates(TrajectoryKind kind, const Objective& f, std::span<const double> mu0,
                                          std::span<const double> sigma, double delta, std::size_t steps,
                                          const TrajectoryOptions& opt) {
  const std::size_t p = mu0.size();
  Vec half(p);
  for (std::size_t i = 0; i < p; ++i) half[i] = std::sqrt(sigma[i]);
  std::vector<Vec> path{Vec(mu0.begin(), mu0.end())};
  Vec mu(mu0.begin(), mu0.end());
  for (std::size_t k = 0; k < steps; ++k) {
    Vec dir;
    if (kind == TrajectoryKind::Sam) {
      const Vec g = f.gradient(mu);
      const auto eps = sam_perturbation(mu, g, sigma);
      dir = eps.degenerate ? g : f.gradient(vec::add(mu, eps.epsilon));
    } else {
      // Antithetic pairs: exact for gradients linear in eta.
      const std::size_t pairs = std::max<std::size_t>(1, opt.mc_draws / 2);
      dir.assign(p, 0.0);
      const CounterRng rng(opt.seed, k);
      Vec plus(p), minus(p);
      for (std::size_t m = 0; m < pairs; ++m) {
        for (std::size_t i = 0; i < p; ++i) {
          const double e = half[i] * rng.normal(m * p + i);
          plus[i] = mu[i] + e;
          minus[i] = mu[i] - e;
        }
        vec::axpy(0.5 / static_cast<double>(pairs), f.gradient(plus), dir);
        vec::axpy(0.5 / static_cast<double>(pairs), f.gradient(minus), dir);
      }
    }
    vec::axpy(-delta, dir, mu);
    path.push_back(mu);
  }
  return path;
}

inline double max_path_deviation(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, vec::norm(vec::sub(a[k], b[k])));
  return m;
}

}  // namespace detail

/// Max over step times t_k = k delta of |mu_k - flow(t_k)| for the original
/// and modified flows. Requires p <= 10 and an exact Hessian.
inline TrajectoryDeviation backward_error_trajectory_check(TrajectoryKind kind, const Objective& f,
                                                           std::span<const double> mu0,
                                                           std::span<const double> sigma_diag, double delta,
                                                           std::size_t steps, const TrajectoryOptions& opt = {}) {
  if (f.dim() > 10) throw Error(ErrorKind::DimensionTooLarge, "trajectory check supports p <= 10");
  if (mu0.size() != f.dim() || sigma_diag.size() != f.dim())
    throw Error(ErrorKind::ShapeMismatch, "trajectory check length mismatch");
  using detail::Flow;
  const auto iterates = detail::discrete_iterates(kind, f, mu0, sigma_diag, delta, steps, opt);
  const auto original = detail::integrate_flow(Flow::Original, kind, f, mu0, sigma_diag, delta, steps, opt.tolerance);
  const auto modified = detail::integrate_flow(Flow::Modified, kind, f, mu0, sigma_diag, delta, steps, opt.tolerance);
  TrajectoryDeviation d;
  d.from_original = detail::max_path_deviation(iterates, original);
  d.from_modified = detail::max_path_deviation(iterates, modified);
  if (kind == TrajectoryKind::Sam) {
    const auto inter = detail::integrate_flow(Flow::Intermediate, kind, f, mu0, sigma_diag, delta, steps, opt.tolerance);
    d.from_intermediate = detail::max_path_deviation(iterates, inter);
  } else {
    d.from_intermediate = d.from_modified;
  }
  return d;
}

struct OrderStudy {
  Vec deltas;
  std::vector<TrajectoryDeviation> deviations;
  double original_order = 0.0;
  double modified_order = 0.0;
  double intermediate_order = 0.0;
};

/// Repeats the trajectory check with delta halved `halvings` times over the
/// fixed time horizon steps0 * delta0, and fits log-log orders in delta.
inline OrderStudy backward_error_order_study(TrajectoryKind kind, const Objective& f, std::span<const double> mu0,
                                             std::span<const double> sigma_diag, double delta0, std::size_t steps0,
                                             int halvings = 3, const TrajectoryOptions& opt = {}) {
  OrderStudy s;
  Vec orig, mod, inter;
  for (int h = 0; h <= halvings; ++h) {
    const double delta = delta0 / std::ldexp(1.0, h);
    const std::size_t steps = steps0 << h;
    const auto d = backward_error_trajectory_check(kind, f, mu0, sigma_diag, delta, steps, opt);
    s.deltas.push_back(delta);
    s.deviations.push_back(d);
    orig.push_back(d.from_original);
    mod.push_back(d.from_modified);
    inter.push_back(d.from_intermediate);
  }
  s.original_order = loglog_slope(s.deltas, orig);
  s.modified_order = loglog_slope(s.deltas, mod);
  s.intermediate_order = loglog_slope(s.deltas, inter);
  return s;
}

}  // namespace flatopt
