#pragma once

#include <cmath>
#include <span>

#include "flatopt/core_math.hpp"

namespace flatopt {

/// KL[N(mu, diag(sigma)) || N(0, sigma0^2 I)]
///   = 1/2 [Tr Sigma / sigma0^2 - log det Sigma + p log sigma0^2 + |mu|^2 / sigma0^2 - p]
inline double gaussian_kl(std::span<const double> mu, std::span<const double> sigma_diag, double sigma0_sq) {
  if (mu.size() != sigma_diag.size()) throw Error(ErrorKind::ShapeMismatch, "gaussian_kl length mismatch");
  if (!(sigma0_sq > 0.0)) throw Error(ErrorKind::NonPositiveVariance, "prior variance must be positive");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double s = sigma_diag[i];
    if (!(s > 0.0)) throw Error(ErrorKind::NonPositiveVariance, "posterior variance must be positive");
    const double r = s / sigma0_sq;
    // r - log r - 1 >= 0 is evaluated directly to keep precision near r = 1.
    kl += (r - 1.0) - std::log1p(r - 1.0) + mu[i] * mu[i] / sigma0_sq;
  }
  return 0.5 * kl;
}

enum class GammaForm { Main, Appendix };

/// High-probability radius of a standard Gaussian in p dimensions,
/// sqrt(p) (1 + sqrt(ln n / p)). The appendix variant uses p in place of sqrt(p).
inline double gamma_radius(std::size_t p, std::size_t n, GammaForm form = GammaForm::Main) {
  if (p == 0 || n == 0) throw Error(ErrorKind::ShapeMismatch, "gamma_radius needs p, n >= 1");
  const double pd = static_cast<double>(p);
  const double lead = form == GammaForm::Main ? std::sqrt(pd) : pd;
  return lead * (1.0 + std::sqrt(std::log(static_cast<double>(n)) / pd));
}

struct BoundInputs {
  std::size_t p = 1;
  std::size_t n = 2;
  double delta = 0.05;
  double empirical_sam_loss = 0.0;
  double kl_value = 0.0;
  double loss_max = 1.0;
};

inline void validate(const BoundInputs& in) {
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw Error(ErrorKind::InvalidDelta, "delta must lie in (0, 1)");
  if (in.n < 2) throw Error(ErrorKind::ShapeMismatch, "bound needs n >= 2");
  if (!(in.kl_value >= 0.0) || !(in.loss_max >= 0.0))
    throw Error(ErrorKind::ShapeMismatch, "kl and loss ceiling must be nonnegative");
}

/// empirical SAM loss + L_max / sqrt(n) + sqrt((KL + ln(n/delta) + c_cover p) / (2 (n - 1)))
/// c_cover stands in for the unspecified constant of the O(p) covering term.
inline double pac_bound(const BoundInputs& in, double c_cover = 1.0) {
  validate(in);
  const double n = static_cast<double>(in.n);
  const double complexity = in.kl_value + std::log(n / in.delta) + c_cover * static_cast<double>(in.p);
  return in.empirical_sam_loss + in.loss_max / std::sqrt(n) + std::sqrt(complexity / (2.0 * (n - 1.0)));
}

}  // namespace flatopt
