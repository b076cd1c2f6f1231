#pragma once

// Numerical checks of the flatness penalties implied by SAM and MFVI:
// brute-force worst case on the ellipsoid, Monte-Carlo Gaussian smoothing,
// their Taylor surrogates, and the effective losses seen by finite-step
// gradient descent.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "flatopt/core_math.hpp"
#include "flatopt/dataset.hpp"
#include "flatopt/objective.hpp"

namespace flatopt {

struct BallMax {
  double value = 0.0;
  Vec epsilon;
};

namespace detail {

// eps(u) = sqrt(p) Sigma^{1/2} u maps the unit ball onto eps^T Sigma^{-1} eps <= p.
inline Vec ball_point(std::span<const double> sqrt_p_sigma_half, std::span<const double> u) {
  Vec e(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) e[i] = sqrt_p_sigma_half[i] * u[i];
  return e;
}

inline void project_to_unit_ball(Vec& u) {
  const double n = vec::norm(u);
  if (n > 1.0)
    for (auto& x : u) x /= n;
}

}  // namespace detail

/// Maximum of L(mu + eps) over eps^T Sigma^{-1} eps <= p, for p <= 3, by a
/// dense sweep of about `resolution` points over concentric shells followed
/// by a projected pattern search from the best sweep point.
inline BallMax worst_case_ball_max(const Objective& f, std::span<const double> mu, std::span<const double> sigma_diag,
                                   std::size_t resolution = 1'000'000) {
  const std::size_t p = f.dim();
  if (p > 3) throw Error(ErrorKind::DimensionTooLarge, "brute-force ball max supports p <= 3");
  if (mu.size() != p || sigma_diag.size() != p) throw Error(ErrorKind::ShapeMismatch, "ball max length mismatch");
  resolution = std::max<std::size_t>(resolution, 64);

  Vec scale(p);
  for (std::size_t i = 0; i < p; ++i) scale[i] = std::sqrt(static_cast<double>(p) * sigma_diag[i]);
  Vec theta(p);
  auto eval = [&](const Vec& u) {
    for (std::size_t i = 0; i < p; ++i) theta[i] = mu[i] + scale[i] * u[i];
    return f.value(theta);
  };

  Vec best_u(p, 0.0);
  double best = eval(best_u);
  auto consider = [&](const Vec& u) {
    const double v = eval(u);
    if (v > best) {
      best = v;
      best_u = u;
    }
  };

  double spacing;
  if (p == 1) {
    const std::size_t n = resolution;
    for (std::size_t k = 0; k < n; ++k) consider(Vec{-1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(n - 1)});
    spacing = 2.0 / static_cast<double>(n - 1);
  } else if (p == 2) {
    const std::size_t shells = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(resolution)) / 4));
    const std::size_t per_shell = resolution / shells;
    for (std::size_t s = 1; s <= shells; ++s) {
      const double r = static_cast<double>(s) / static_cast<double>(shells);
      for (std::size_t k = 0; k < per_shell; ++k) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(per_shell);
        consider(Vec{r * std::cos(a), r * std::sin(a)});
      }
    }
    spacing = 2.0 * std::numbers::pi / static_cast<double>(per_shell);
  } else {
    const std::size_t shells = std::max<std::size_t>(1, static_cast<std::size_t>(std::cbrt(static_cast<double>(resolution)) / 2));
    const std::size_t per_shell = resolution / shells;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t s = 1; s <= shells; ++s) {
      const double r = static_cast<double>(s) / static_cast<double>(shells);
      for (std::size_t k = 0; k < per_shell; ++k) {
        const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(per_shell);
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double a = golden * static_cast<double>(k);
        consider(Vec{r * rho * std::cos(a), r * rho * std::sin(a), r * z});
      }
    }
    spacing = std::sqrt(4.0 * std::numbers::pi / static_cast<double>(per_shell));
  }

  // Projected compass search.
  double step = 2.0 * spacing;
  Vec u = best_u;
  for (int iter = 0; iter < 100000 && step > 1e-14; ++iter) {
    bool improved = false;
    for (std::size_t j = 0; j < p && !improved; ++j)
      for (double sign : {1.0, -1.0}) {
        Vec cand = u;
        cand[j] += sign * step;
        detail::project_to_unit_ball(cand);
        const double v = eval(cand);
        if (v > best) {
          best = v;
          u = cand;
          improved = true;
          break;
        }
      }
    if (!improved) step *= 0.5;
  }
  return {best, detail::ball_point(scale, u)};
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo estimate of E_{eta ~ N(0, I)} L(mu + Sigma^{1/2} eta); draw k
/// uses noise stream k of `seed`.
inline MonteCarloEstimate mc_smoothed_loss(const Objective& f, std::span<const double> mu,
                                           std::span<const double> sigma_diag, std::size_t n_samples,
                                           std::uint64_t seed) {
  if (n_samples < 2) throw Error(ErrorKind::ShapeMismatch, "mc_smoothed_loss needs at least two samples");
  const std::size_t p = mu.size();
  Vec half(p);
  for (std::size_t i = 0; i < p; ++i) half[i] = std::sqrt(sigma_diag[i]);
  Vec theta(p);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const CounterRng rng(seed, k);
    for (std::size_t i = 0; i < p; ++i) theta[i] = mu[i] + half[i] * rng.normal(i);
    const double v = f.value(theta);
    const double d = v - mean;
    mean += d / static_cast<double>(k + 1);
    m2 += d * (v - mean);
  }
  const double var = m2 / static_cast<double>(n_samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(n_samples))};
}

/// sqrt(p) |g|_Sigma
inline double sam_gradient_penalty(std::span<const double> grad, std::span<const double> sigma_diag) {
  return std::sqrt(static_cast<double>(grad.size())) * std::sqrt(sigma_quadratic_form(sigma_diag, grad));
}

struct Prop1Result {
  Vec rhos;
  Vec errors;
  double slope = 0.0;
};

/// Residual of the first-order SAM surrogate L(mu) + sqrt(p)|g|_Sigma against
/// the brute-force ball maximum, for Sigma(rho) = (rho^2 / p) diag(shape).
inline Prop1Result prop1_check(const Objective& f, std::span<const double> mu, std::span<const double> shape,
                               std::span<const double> rho_sequence, std::size_t resolution = 1'000'000) {
  const std::size_t p = f.dim();
  if (p > 3) throw Error(ErrorKind::DimensionTooLarge, "prop1_check supports p <= 3");
  Prop1Result r;
  const double base = f.value(mu);
  const Vec g = f.gradient(mu);
  for (double rho : rho_sequence) {
    Vec sigma(p);
    for (std::size_t i = 0; i < p; ++i) sigma[i] = rho * rho / static_cast<double>(p) * shape[i];
    const double ball = worst_case_ball_max(f, mu, sigma, resolution).value;
    r.rhos.push_back(rho);
    r.errors.push_back(std::abs(ball - (base + sam_gradient_penalty(g, sigma))));
  }
  bool positive = r.errors.size() >= 2;
  for (double e : r.errors) positive = positive && e > 0.0;
  r.slope = positive ? loglog_slope(r.rhos, r.errors) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

struct Prop3Result {
  double mc_estimate = 0.0;
  double mc_standard_error = 0.0;
  double trace_formula = 0.0;  // L(mu) + 1/2 Tr[Sigma H]
  double z_score = 0.0;
};

/// Compares the Gaussian-smoothed loss with its second-order form L + Tr[Sigma H]/2.
inline Prop3Result prop3_check(const Objective& f, std::span<const double> mu, std::span<const double> sigma_diag,
                               std::size_t n_samples = 100'000, std::uint64_t seed = 1) {
  const Matrix h = f.hessian(mu);
  Prop3Result r;
  const auto mc = mc_smoothed_loss(f, mu, sigma_diag, n_samples, seed);
  r.mc_estimate = mc.mean;
  r.mc_standard_error = mc.standard_error;
  r.trace_formula = f.value(mu) + 0.5 * trace_sigma_h(sigma_diag, h);
  const double diff = r.mc_estimate - r.trace_formula;
  if (r.mc_standard_error > 0.0)
    r.z_score = diff / r.mc_standard_error;
  else
    r.z_score = std::abs(diff) <= 1e-12 * (1.0 + std::abs(r.trace_formula)) ? 0.0 : std::numeric_limits<double>::infinity();
  return r;
}

/// Hutchinson estimate of Tr[Sigma H] with Rademacher probes z:
/// (Sigma^{1/2} z)^T H (Sigma^{1/2} z), using Hessian-vector products only.
inline MonteCarloEstimate hutchinson_trace(const Objective& f, std::span<const double> mu,
                                           std::span<const double> sigma_diag, std::size_t n_probes,
                                           std::uint64_t seed) {
  if (n_probes < 2) throw Error(ErrorKind::ShapeMismatch, "hutchinson_trace needs at least two probes");
  const std::size_t p = mu.size();
  Vec v(p);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < n_probes; ++k) {
    const CounterRng rng(seed, k);
    for (std::size_t i = 0; i < p; ++i) v[i] = std::sqrt(sigma_diag[i]) * rng.rademacher(i);
    const double x = vec::dot(v, f.hessian_vector_product(mu, v));
    const double d = x - mean;
    mean += d / static_cast<double>(k + 1);
    m2 += d * (x - mean);
  }
  return {mean, std::sqrt(m2 / static_cast<double>(n_probes - 1) / static_cast<double>(n_probes))};
}

enum class EffectiveLossKind {
  SamIdeal,      // L + sqrt(p)|g|_Sigma
  MfviIdeal,     // L + 1/2 Tr[Sigma H]
  SamDynamics,   // L + sqrt(p)|g|_Sigma + delta/4 |g|^2
  MfviDynamics,  // L + delta/4 |g|^2 + delta/4 Tr[Sigma H^2]
};

constexpr std::string_view to_string(EffectiveLossKind k) {
  switch (k) {
    case EffectiveLossKind::SamIdeal: return "sam_ideal";
    case EffectiveLossKind::MfviIdeal: return "mfvi_ideal";
    case EffectiveLossKind::SamDynamics: return "sam_row";
    case EffectiveLossKind::MfviDynamics: return "mfvi_row";
  }
  return "unknown";
}

/// Term-by-term effective loss. Terms that do not belong to `kind` are zero.
struct EffectiveLossReport {
  EffectiveLossKind kind = EffectiveLossKind::SamIdeal;
  double base_loss = 0.0;
  double grad_norm_penalty = 0.0;
  double trace_penalty = 0.0;
  double trace_sq_penalty = 0.0;
  double gd_bias = 0.0;
  double delta = 0.0;
  double rho = 0.0;  // sqrt(Tr Sigma); equals rho for Sigma = rho^2/p I

  double total() const { return base_loss + grad_norm_penalty + trace_penalty + trace_sq_penalty + gd_bias; }
};

inline EffectiveLossReport modified_loss(EffectiveLossKind kind, const Objective& f, std::span<const double> mu,
                                         std::span<const double> sigma_diag, double delta) {
  EffectiveLossReport r;
  r.kind = kind;
  r.delta = delta;
  r.base_loss = f.value(mu);
  double tr = 0.0;
  for (double s : sigma_diag) tr += s;
  r.rho = std::sqrt(tr);
  const Vec g = f.gradient(mu);
  switch (kind) {
    case EffectiveLossKind::SamIdeal:
      r.grad_norm_penalty = sam_gradient_penalty(g, sigma_diag);
      break;
    case EffectiveLossKind::MfviIdeal:
      r.trace_penalty = 0.5 * trace_sigma_h(sigma_diag, f.hessian(mu));
      break;
    case EffectiveLossKind::SamDynamics:
      r.grad_norm_penalty = sam_gradient_penalty(g, sigma_diag);
      r.gd_bias = 0.25 * delta * vec::dot(g, g);
      break;
    case EffectiveLossKind::MfviDynamics:
      r.gd_bias = 0.25 * delta * vec::dot(g, g);
      r.trace_sq_penalty = 0.25 * delta * trace_sigma_h2(sigma_diag, f.hessian(mu));
      break;
  }
  return r;
}

inline void write_effective_loss_csv(std::ostream& out, std::span<const EffectiveLossReport> rows) {
  out << "row_kind,L,grad_norm_pen,trace_pen,trace_sq_pen,gd_bias,delta,rho\n";
  for (const auto& r : rows)
    out << to_string(r.kind) << ',' << format_double(r.base_loss) << ',' << format_double(r.grad_norm_penalty) << ','
        << format_double(r.trace_penalty) << ',' << format_double(r.trace_sq_penalty) << ','
        << format_double(r.gd_bias) << ',' << format_double(r.delta) << ',' << format_double(r.rho) << '\n';
}

struct UpperBoundResult {
  double mc_mean = 0.0;
  double mc_standard_error = 0.0;
  double ball_max = 0.0;
  bool holds = false;
};

/// E L(mu + Sigma^{1/2} eta) <= max_{eps^T Sigma^{-1} eps <= p} L(mu + eps), within 3 standard errors.
inline UpperBoundResult upper_bound_check(const Objective& f, std::span<const double> mu,
                                          std::span<const double> sigma_diag, std::size_t n_samples,
                                          std::uint64_t seed = 1, std::size_t resolution = 1'000'000) {
  if (f.dim() > 3) throw Error(ErrorKind::DimensionTooLarge, "upper_bound_check supports p <= 3");
  const auto mc = mc_smoothed_loss(f, mu, sigma_diag, n_samples, seed);
  const double ball = worst_case_ball_max(f, mu, sigma_diag, resolution).value;
  return {mc.mean, mc.standard_error, ball, mc.mean <= ball + 3.0 * mc.standard_error};
}

}  // namespace flatopt
