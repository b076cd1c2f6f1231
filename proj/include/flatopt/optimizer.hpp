#pragma once

// One perturbed-gradient stepper covering SGD, SAM, ASAM, FSAM, RandomSAM,
// MFVI and VariationalSAM. A configuration picks the perturbation
// (worst-case or Gaussian), the covariance (fixed or learned) and the
// penalty (L2 or Gaussian KL); the descent direction is always
//
//     grad L(mu + Sigma^{1/2} eta) + 2 alpha mu
//
// followed by heavy-ball momentum. Learned covariances live in log space,
// sigma_i^2 = exp(phi_i), so they stay positive.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <variant>
#include <vector>

#include "flatopt/core_math.hpp"
#include "flatopt/objective.hpp"

namespace flatopt {

enum class Perturbation { None, WorstCase, Gaussian };

struct NoPenalty {};

/// alpha |mu|^2
struct L2Penalty {
  double alpha = 0.0;
};

/// (1/N) KL[N(mu, Sigma) || N(0, sigma0^2 I)]; its mu part is alpha |mu|^2
/// with alpha = 1 / (2 N sigma0^2).
struct KlPenalty {
  double sigma0 = 1.0;
  double n_data = 1.0;

  double sigma0_sq() const { return sigma0 * sigma0; }
  double alpha() const { return 1.0 / (2.0 * n_data * sigma0 * sigma0); }
};

using Penalty = std::variant<NoPenalty, L2Penalty, KlPenalty>;

inline double penalty_alpha(const Penalty& p) {
  if (const auto* l2 = std::get_if<L2Penalty>(&p)) return l2->alpha;
  if (const auto* kl = std::get_if<KlPenalty>(&p)) return kl->alpha();
  return 0.0;
}

/// Piecewise-constant learning-rate multipliers, left-closed at each breakpoint.
struct StepSchedule {
  std::vector<std::pair<int, double>> breakpoints;
};

inline void validate_schedule(const StepSchedule& s) {
  for (std::size_t i = 1; i < s.breakpoints.size(); ++i)
    if (s.breakpoints[i].first <= s.breakpoints[i - 1].first)
      throw Error(ErrorKind::ConfigError, "schedule epochs must be strictly increasing");
}

inline double apply_schedule(const StepSchedule& schedule, int epoch) {
  double mult = 1.0;
  for (const auto& [start, m] : schedule.breakpoints) {
    if (epoch < start) break;
    mult = m;
  }
  return mult;
}

struct OptimizerConfig {
  Perturbation perturbation = Perturbation::None;
  CovarianceSpec covariance = CovarianceSpec::isotropic(0.0);
  bool learn_sigma = false;
  Penalty penalty = NoPenalty{};
  double lr_mu = 0.1;
  double lr_sigma = 0.0;
  double momentum = 0.0;
  StepSchedule schedule;
  std::uint64_t seed = 0;
};

inline void validate(const OptimizerConfig& c) {
  if (!(c.lr_mu >= 0.0)) throw Error(ErrorKind::ConfigError, "lr must be >= 0");
  if (!(c.lr_sigma >= 0.0)) throw Error(ErrorKind::ConfigError, "lr_sigma must be >= 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw Error(ErrorKind::ConfigError, "momentum must lie in [0, 1)");
  if (c.learn_sigma && (!c.covariance.is<Diagonal>() || !(c.lr_sigma > 0.0)))
    throw Error(ErrorKind::ConfigError, "a learned covariance must be Diagonal with lr_sigma > 0");
  if (const auto* kl = std::get_if<KlPenalty>(&c.penalty); kl && (!(kl->sigma0 > 0.0) || !(kl->n_data > 0.0)))
    throw Error(ErrorKind::ConfigError, "KL penalty needs sigma0 > 0 and N > 0");
  validate_schedule(c.schedule);
}

struct OptimizerState {
  ParamVector mu;
  CovarianceSpec sigma;
  ParamVector momentum_buffer;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;  // noise for step t is drawn from stream t
};

inline OptimizerState init_state(const OptimizerConfig& config, ParamVector mu0) {
  validate(config);
  const std::size_t p = mu0.size();
  return OptimizerState{std::move(mu0), config.covariance, ParamVector::zeros(p), 0, config.seed};
}

struct StepInfo {
  bool degenerate = false;
  int gradient_evals = 0;
};

struct SamPerturbation {
  Vec epsilon;
  bool degenerate = false;
};

/// Threshold on |Sigma^{1/2} g| below which the worst-case direction is
/// undefined and the perturbation collapses to zero.
inline constexpr double kDegenerateGradNorm = 1e-12;

/// First-order worst case on the ellipsoid eps^T Sigma^{-1} eps <= p:
///   g~ = Sigma^{1/2} g,  eta = sqrt(p) g~ / |g~|,  eps* = Sigma^{1/2} eta.
inline SamPerturbation sam_perturbation(std::span<const double> mu, std::span<const double> grad,
                                        std::span<const double> sigma_diag) {
  if (mu.size() != grad.size() || grad.size() != sigma_diag.size())
    throw Error(ErrorKind::ShapeMismatch, "sam_perturbation length mismatch");
  const Vec g_tilde = sigma_half_apply(sigma_diag, grad);
  const double n = vec::norm(g_tilde);
  if (!(n >= kDegenerateGradNorm)) return {Vec(grad.size(), 0.0), true};
  const double scale = std::sqrt(static_cast<double>(grad.size())) / n;
  Vec eta = vec::scaled(g_tilde, scale);
  return {sigma_half_apply(sigma_diag, eta), false};
}

/// d/d sigma_i^2 of (1/N) KL[N(mu, Sigma) || N(0, sigma0^2 I)].
inline Vec kl_sigma2_gradient(std::span<const double> sigma2, const KlPenalty& kl) {
  Vec g(sigma2.size());
  for (std::size_t i = 0; i < sigma2.size(); ++i)
    g[i] = (1.0 / (2.0 * kl.n_data)) * (1.0 / kl.sigma0_sq() - 1.0 / sigma2[i]);
  return g;
}

/// Reparametrized Sigma-gradient of the single-sample MFVI loss
///   L(mu + sigma .* eta) + (1/N) KL,
/// returned with respect to the log-variances phi_i = log sigma_i^2.
/// grad_at_perturbed is grad L evaluated at mu + sigma .* eta.
inline Vec mfvi_log_sigma_gradient(std::span<const double> grad_at_perturbed, std::span<const double> eta,
                                   std::span<const double> sigma2, const Penalty& penalty) {
  const std::size_t p = sigma2.size();
  Vec g(p);
  // d sigma_i / d phi_i = sigma_i / 2
  for (std::size_t i = 0; i < p; ++i) g[i] = grad_at_perturbed[i] * eta[i] * 0.5 * std::sqrt(sigma2[i]);
  if (const auto* kl = std::get_if<KlPenalty>(&penalty)) {
    const Vec k = kl_sigma2_gradient(sigma2, *kl);
    for (std::size_t i = 0; i < p; ++i) g[i] += k[i] * sigma2[i];
  }
  return g;
}

/// Frozen-noise MFVI objective whose phi-gradient is mfvi_log_sigma_gradient.
inline double mfvi_single_sample_loss(const Objective& f, Batch batch, std::span<const double> mu,
                                      std::span<const double> log_sigma2, std::span<const double> eta,
                                      const Penalty& penalty) {
  const std::size_t p = mu.size();
  Vec theta(p);
  Vec sigma2(p);
  for (std::size_t i = 0; i < p; ++i) {
    sigma2[i] = std::exp(log_sigma2[i]);
    theta[i] = mu[i] + std::sqrt(sigma2[i]) * eta[i];
  }
  double loss = f.value(theta, batch);
  if (const auto* kl = std::get_if<KlPenalty>(&penalty)) {
    double k = 0.0;
    for (std::size_t i = 0; i < p; ++i)
      k += sigma2[i] / kl->sigma0_sq() - std::log(sigma2[i]) + std::log(kl->sigma0_sq()) + mu[i] * mu[i] / kl->sigma0_sq() - 1.0;
    loss += 0.5 * k / kl->n_data;
  }
  return loss;
}

struct VsamSigmaGradient {
  Vec d_sigma2;  // gradient with respect to sigma_i^2
  bool degenerate = false;
};

/// Gradient in Sigma of the Taylor surrogate of the VSAM loss
///   L(mu) + sqrt(p) sqrt(g^T Sigma g) + Tr Sigma / (2 N sigma0^2) - log det Sigma / (2N) + |mu|^2 / (2 N sigma0^2)
/// with g held fixed. When |Sigma^{1/2} g| vanishes the square-root term is dropped.
inline VsamSigmaGradient vsam_sigma2_gradient(std::span<const double> grad, std::span<const double> sigma2,
                                              const KlPenalty& kl) {
  const std::size_t p = sigma2.size();
  VsamSigmaGradient out{kl_sigma2_gradient(sigma2, kl), false};
  const double q = sigma_quadratic_form(sigma2, grad);
  if (!(std::sqrt(q) >= kDegenerateGradNorm)) {
    out.degenerate = true;
    return out;
  }
  const double coef = std::sqrt(static_cast<double>(p)) / (2.0 * std::sqrt(q));
  for (std::size_t i = 0; i < p; ++i) out.d_sigma2[i] += coef * grad[i] * grad[i];
  return out;
}

/// Value of the VSAM Taylor surrogate (see vsam_sigma2_gradient).
inline double vsam_surrogate_loss(double loss_at_mu, std::span<const double> grad, std::span<const double> mu,
                                  std::span<const double> sigma2, const KlPenalty& kl) {
  const std::size_t p = sigma2.size();
  double v = loss_at_mu + std::sqrt(static_cast<double>(p)) * std::sqrt(sigma_quadratic_form(sigma2, grad));
  for (std::size_t i = 0; i < p; ++i) {
    v += sigma2[i] / (2.0 * kl.n_data * kl.sigma0_sq());
    v -= std::log(sigma2[i]) / (2.0 * kl.n_data);
    v += mu[i] * mu[i] / (2.0 * kl.n_data * kl.sigma0_sq());
  }
  return v;
}

namespace detail {

// Log-variance bounds; exp stays finite and positive inside them.
inline constexpr double kLogSigmaMin = -700.0;
inline constexpr double kLogSigmaMax = 700.0;

inline void descend(OptimizerState& state, const OptimizerConfig& config, Vec direction, double lr_scale) {
  const double alpha = penalty_alpha(config.penalty);
  const std::size_t p = direction.size();
  for (std::size_t i = 0; i < p; ++i) direction[i] += 2.0 * alpha * state.mu[i];
  Vec buf = state.momentum_buffer.values();
  Vec mu = state.mu.values();
  const double lr = config.lr_mu * lr_scale;
  for (std::size_t i = 0; i < p; ++i) {
    buf[i] = config.momentum * buf[i] + direction[i];
    mu[i] -= lr * buf[i];
  }
  state.momentum_buffer.assign(std::move(buf));
  state.mu.assign(std::move(mu));
  ++state.step;
}

inline void update_log_sigma(OptimizerState& state, const OptimizerConfig& config, std::span<const double> sigma2,
                             std::span<const double> d_phi) {
  Vec next(sigma2.size());
  for (std::size_t i = 0; i < sigma2.size(); ++i) {
    const double phi = std::log(sigma2[i]) - config.lr_sigma * d_phi[i];
    next[i] = std::exp(std::clamp(phi, kLogSigmaMin, kLogSigmaMax));
  }
  state.sigma = CovarianceSpec::diagonal(std::move(next));
}

inline Vec perturbed(std::span<const double> mu, std::span<const double> eps) { return vec::add(mu, eps); }

}  // namespace detail

/// Plain (momentum) SGD on the penalized loss.
inline StepInfo sgd_step(OptimizerState& state, const Objective& f, Batch batch, const OptimizerConfig& config,
                         double lr_scale = 1.0) {
  detail::descend(state, config, f.gradient(state.mu, batch), lr_scale);
  return {false, 1};
}

/// SAM / ASAM / FSAM: gradient at mu, worst-case perturbation, gradient at
/// mu + eps*. Two gradient evaluations per step.
inline StepInfo sam_step(OptimizerState& state, const Objective& f, Batch batch, const OptimizerConfig& config,
                         double lr_scale = 1.0) {
  if (config.perturbation != Perturbation::WorstCase)
    throw Error(ErrorKind::ConfigError, "sam_step needs a worst-case perturbation");
  Vec g1;
  Vec sigma;
  if (state.sigma.is<FisherAdaptive>()) {
    const auto per_example = f.per_example_gradients(state.mu, batch);
    sigma = resolve_sigma(state.sigma, state.mu, per_example);
    g1.assign(state.mu.size(), 0.0);
    for (const auto& g : per_example) vec::axpy(1.0 / static_cast<double>(per_example.size()), g, g1);
  } else {
    g1 = f.gradient(state.mu, batch);
    sigma = resolve_sigma(state.sigma, state.mu);
  }
  const auto eps = sam_perturbation(state.mu, g1, sigma);
  Vec g2 = eps.degenerate ? std::move(g1) : f.gradient(detail::perturbed(state.mu, eps.epsilon), batch);
  detail::descend(state, config, std::move(g2), lr_scale);
  return {eps.degenerate, 2};
}

/// RandomSAM: one gradient at mu + Sigma^{1/2} eta with a fresh standard
/// normal eta and a fixed isotropic Sigma.
inline StepInfo random_sam_step(OptimizerState& state, const Objective& f, Batch batch,
                                const OptimizerConfig& config, double lr_scale = 1.0) {
  if (config.perturbation != Perturbation::Gaussian || !state.sigma.is<Isotropic>())
    throw Error(ErrorKind::ConfigError, "random_sam_step needs a Gaussian perturbation with isotropic Sigma");
  const Vec sigma = resolve_sigma(state.sigma, state.mu);
  const auto eta = sample_eta(state.mu.size(), state.seed, state.step);
  const Vec theta = detail::perturbed(state.mu, sigma_half_apply(sigma, eta.eta));
  detail::descend(state, config, f.gradient(theta, batch), lr_scale);
  return {false, 1};
}

/// MFVI: one shared eta drives both the mu update (gradient at the sampled
/// point plus 2 alpha mu) and the reparametrized log-variance update.
inline StepInfo mfvi_step(OptimizerState& state, const Objective& f, Batch batch, const OptimizerConfig& config,
                          double lr_scale = 1.0) {
  if (!config.learn_sigma || !state.sigma.is<Diagonal>() || !(config.lr_sigma > 0.0))
    throw Error(ErrorKind::ConfigError, "mfvi_step needs a learned diagonal covariance and lr_sigma > 0");
  const Vec sigma2 = state.sigma.as<Diagonal>().variances;
  const auto eta = sample_eta(state.mu.size(), state.seed, state.step);
  const Vec theta = detail::perturbed(state.mu, sigma_half_apply(sigma2, eta.eta));
  Vec g = f.gradient(theta, batch);
  const Vec d_phi = mfvi_log_sigma_gradient(g, eta.eta, sigma2, config.penalty);
  detail::descend(state, config, std::move(g), lr_scale);
  detail::update_log_sigma(state, config, sigma2, d_phi);
  return {false, 1};
}

/// VariationalSAM: SAM step for mu under the learned ellipsoid, then a
/// log-variance step on the Taylor surrogate with g = grad L(mu) taken
/// before the mu update.
inline StepInfo vsam_step(OptimizerState& state, const Objective& f, Batch batch, const OptimizerConfig& config,
                          double lr_scale = 1.0) {
  if (!config.learn_sigma || !state.sigma.is<Diagonal>() || !(config.lr_sigma > 0.0))
    throw Error(ErrorKind::ConfigError, "vsam_step needs a learned diagonal covariance and lr_sigma > 0");
  const auto* kl = std::get_if<KlPenalty>(&config.penalty);
  if (kl == nullptr) throw Error(ErrorKind::ConfigError, "vsam_step needs a KL penalty");
  const Vec sigma2 = state.sigma.as<Diagonal>().variances;
  Vec g1 = f.gradient(state.mu, batch);
  const auto eps = sam_perturbation(state.mu, g1, sigma2);
  const auto sig_grad = vsam_sigma2_gradient(g1, sigma2, *kl);
  Vec g2 = eps.degenerate ? g1 : f.gradient(detail::perturbed(state.mu, eps.epsilon), batch);
  detail::descend(state, config, std::move(g2), lr_scale);
  Vec d_phi(sigma2.size());
  for (std::size_t i = 0; i < sigma2.size(); ++i) d_phi[i] = sig_grad.d_sigma2[i] * sigma2[i];
  detail::update_log_sigma(state, config, sigma2, d_phi);
  return {eps.degenerate, 2};
}

/// Dispatches on the configuration's perturbation and covariance flags.
inline StepInfo step(OptimizerState& state, const Objective& f, Batch batch, const OptimizerConfig& config,
                     double lr_scale = 1.0) {
  switch (config.perturbation) {
    case Perturbation::None:
      return sgd_step(state, f, batch, config, lr_scale);
    case Perturbation::WorstCase:
      return config.learn_sigma ? vsam_step(state, f, batch, config, lr_scale)
                                : sam_step(state, f, batch, config, lr_scale);
    case Perturbation::Gaussian:
      return config.learn_sigma ? mfvi_step(state, f, batch, config, lr_scale)
                                : random_sam_step(state, f, batch, config, lr_scale);
  }
  return {};
}

/// Mean of the covariance diagonal currently held by the state (0 when it
/// depends on data that is not available here).
inline double mean_sigma2(const OptimizerState& state) {
  if (state.sigma.is<FisherAdaptive>()) return 0.0;
  const Vec d = resolve_sigma(state.sigma, state.mu);
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

/// Full-batch run of `steps` iterations; returns the iterates mu_0..mu_steps.
inline std::vector<Vec> run_trajectory(const Objective& f, const OptimizerConfig& config, ParamVector mu0,
                                       std::size_t steps) {
  OptimizerState state = init_state(config, std::move(mu0));
  std::vector<Vec> path{state.mu.values()};
  path.reserve(steps + 1);
  for (std::size_t k = 0; k < steps; ++k) {
    step(state, f, {}, config);
    path.push_back(state.mu.values());
  }
  return path;
}

}  // namespace flatopt
