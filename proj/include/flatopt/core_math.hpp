#pragma once

// Parameter vectors, diagonal covariances and the Gaussian draws shared by
// every optimizer and analysis routine. All covariances are stored as their
// diagonal; no dense SPD matrices exist anywhere in the library.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "flatopt/error.hpp"
#include "flatopt/rng.hpp"

namespace flatopt {

using Vec = std::vector<double>;

namespace vec {

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline Vec add(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline Vec sub(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline Vec scaled(std::span<const double> a, double s) {
  Vec out(a.begin(), a.end());
  for (auto& x : out) x *= s;
  return out;
}

// y += s * x
inline void axpy(double s, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace vec

/// Flat vector of model parameters. Non-empty and finite by construction.
class ParamVector {
 public:
  explicit ParamVector(Vec values) : values_(std::move(values)) { check(); }

  static ParamVector zeros(std::size_t p) {
    if (p == 0) throw Error(ErrorKind::ShapeMismatch, "parameter count must be positive");
    return ParamVector(Vec(p, 0.0));
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const Vec& values() const noexcept { return values_; }
  std::span<const double> view() const noexcept { return values_; }
  operator std::span<const double>() const noexcept { return values_; }

  /// Replaces the contents; the new values must keep the same length.
  void assign(Vec values) {
    if (values.size() != values_.size())
      throw Error(ErrorKind::ShapeMismatch, "assign changes parameter count");
    if (!vec::all_finite(values))
      throw Error(ErrorKind::NonFiniteValue, "parameter vector has NaN or Inf entries");
    values_ = std::move(values);
  }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  void check() const {
    if (values_.empty()) throw Error(ErrorKind::ShapeMismatch, "parameter count must be positive");
    if (!vec::all_finite(values_))
      throw Error(ErrorKind::NonFiniteValue, "parameter vector has NaN or Inf entries");
  }

  Vec values_;
};

/// Square row-major matrix; only used for exact Hessians of small models.
struct Matrix {
  std::size_t n = 0;
  Vec data;

  Matrix() = default;
  explicit Matrix(std::size_t size) : n(size), data(size * size, 0.0) {}

  static Matrix diagonal(std::span<const double> d) {
    Matrix m(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }

  Vec apply(std::span<const double> v) const {
    assert(v.size() == n);
    Vec out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i] += (*this)(i, j) * v[j];
    return out;
  }

  double max_asymmetry() const {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) m = std::max(m, std::abs((*this)(i, j) - (*this)(j, i)));
    return m;
  }
};

// Bounds applied to |1/mu_i| (or mu_i^2) so the mu-adaptive ellipsoid stays
// positive definite at zero weights.
inline constexpr double kMuAdaptiveFloor = 1e-8;
inline constexpr double kMuAdaptiveCeiling = 1e8;

enum class AsamRule { Table1, WeightSquared };
enum class FisherRule { Fisher, Inverse };

/// Sigma = (rho^2 / p) I. rho = 0 is the point-mass limit used for the
/// collapse-to-SGD checks.
struct Isotropic {
  double rho = 0.0;
};

struct Diagonal {
  Vec variances;
};

/// ASAM-style ellipsoid: scale * diag(|1/mu_i|), or scale * diag(mu_i^2)
/// under WeightSquared.
struct MuAdaptive {
  AsamRule rule = AsamRule::Table1;
  double scale = 1.0;
};

/// FSAM-style ellipsoid from the empirical Fisher diagonal (mean squared
/// per-example gradient) plus damping, or its inverse.
struct FisherAdaptive {
  double damping = 0.0;
  FisherRule rule = FisherRule::Fisher;
  double scale = 1.0;
};

class CovarianceSpec {
 public:
  using Kind = std::variant<Isotropic, Diagonal, MuAdaptive, FisherAdaptive>;

  static CovarianceSpec isotropic(double rho) {
    if (!(rho >= 0.0) || !std::isfinite(rho))
      throw Error(ErrorKind::NonPositiveVariance, "isotropic radius must be finite and >= 0");
    return CovarianceSpec(Isotropic{rho});
  }

  static CovarianceSpec diagonal(Vec variances) {
    if (variances.empty()) throw Error(ErrorKind::ShapeMismatch, "empty diagonal covariance");
    for (double v : variances)
      if (!(v > 0.0) || !std::isfinite(v))
        throw Error(ErrorKind::NonPositiveVariance, "diagonal variances must be positive and finite");
    return CovarianceSpec(Diagonal{std::move(variances)});
  }

  static CovarianceSpec mu_adaptive(AsamRule rule = AsamRule::Table1, double scale = 1.0) {
    if (!(scale > 0.0)) throw Error(ErrorKind::NonPositiveVariance, "mu-adaptive scale must be positive");
    return CovarianceSpec(MuAdaptive{rule, scale});
  }

  static CovarianceSpec fisher_adaptive(double damping, FisherRule rule = FisherRule::Fisher,
                                        double scale = 1.0) {
    if (!(damping >= 0.0)) throw Error(ErrorKind::NonPositiveVariance, "Fisher damping must be >= 0");
    if (!(scale > 0.0)) throw Error(ErrorKind::NonPositiveVariance, "Fisher scale must be positive");
    return CovarianceSpec(FisherAdaptive{damping, rule, scale});
  }

  const Kind& kind() const noexcept { return kind_; }

  template <typename T>
  bool is() const noexcept {
    return std::holds_alternative<T>(kind_);
  }

  template <typename T>
  const T& as() const {
    return std::get<T>(kind_);
  }

 private:
  explicit CovarianceSpec(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_;
};

/// Binds a covariance spec to the current parameters (and, for the Fisher
/// rule, per-example gradients) and returns the concrete Sigma diagonal.
inline Vec resolve_sigma(const CovarianceSpec& spec, std::span<const double> mu,
                         std::span<const Vec> per_example_grads = {}) {
  const std::size_t p = mu.size();
  if (p == 0) throw Error(ErrorKind::ShapeMismatch, "empty parameter vector");

  auto check_positive = [](const Vec& d) {
    for (double v : d)
      if (!(v > 0.0) || !std::isfinite(v))
        throw Error(ErrorKind::NonPositiveVariance, "resolved covariance entry is not positive");
    return d;
  };

  return std::visit(
      [&](const auto& k) -> Vec {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Isotropic>) {
          return Vec(p, k.rho * k.rho / static_cast<double>(p));
        } else if constexpr (std::is_same_v<K, Diagonal>) {
          if (k.variances.size() != p)
            throw Error(ErrorKind::ShapeMismatch, "diagonal covariance length differs from parameter count");
          return k.variances;
        } else if constexpr (std::is_same_v<K, MuAdaptive>) {
          Vec d(p);
          for (std::size_t i = 0; i < p; ++i) {
            const double raw = k.rule == AsamRule::Table1 ? 1.0 / std::abs(mu[i]) : mu[i] * mu[i];
            d[i] = k.scale * std::clamp(raw, kMuAdaptiveFloor, kMuAdaptiveCeiling);
          }
          return check_positive(d);
        } else {
          if (per_example_grads.empty())
            throw Error(ErrorKind::MissingFisherData, "Fisher covariance needs per-example gradients");
          Vec fisher(p, 0.0);
          for (const auto& g : per_example_grads) {
            if (g.size() != p) throw Error(ErrorKind::ShapeMismatch, "per-example gradient length mismatch");
            for (std::size_t i = 0; i < p; ++i) fisher[i] += g[i] * g[i];
          }
          const double inv_n = 1.0 / static_cast<double>(per_example_grads.size());
          for (auto& f : fisher) {
            f = f * inv_n + k.damping;
            if (k.rule == FisherRule::Inverse) f = 1.0 / f;
            f *= k.scale;
          }
          return check_positive(fisher);
        }
      },
      spec.kind());
}

struct GaussianSample {
  Vec eta;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// Length-p standard-normal draw, a pure function of (seed, stream).
inline GaussianSample sample_eta(std::size_t p, std::uint64_t seed, std::uint64_t stream) {
  if (p == 0) throw Error(ErrorKind::ShapeMismatch, "sample_eta needs p > 0");
  const CounterRng rng(seed, stream);
  GaussianSample s{Vec(p), seed, stream};
  for (std::size_t i = 0; i < p; ++i) s.eta[i] = rng.normal(i);
  return s;
}

/// Elementwise sqrt(sigma_i) * v_i.
inline Vec sigma_half_apply(std::span<const double> sigma_diag, std::span<const double> v) {
  if (sigma_diag.size() != v.size()) throw Error(ErrorKind::ShapeMismatch, "sigma/vector length mismatch");
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::sqrt(sigma_diag[i]) * v[i];
  return out;
}

/// g^T diag(sigma) g
inline double sigma_quadratic_form(std::span<const double> sigma_diag, std::span<const double> g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += sigma_diag[i] * g[i] * g[i];
  return s;
}

/// Tr[diag(sigma) H]
inline double trace_sigma_h(std::span<const double> sigma_diag, const Matrix& h) {
  double t = 0.0;
  for (std::size_t i = 0; i < h.n; ++i) t += sigma_diag[i] * h(i, i);
  return t;
}

/// Tr[diag(sigma) H^2] for symmetric H; nonnegative whenever sigma >= 0.
inline double trace_sigma_h2(std::span<const double> sigma_diag, const Matrix& h) {
  double t = 0.0;
  for (std::size_t i = 0; i < h.n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < h.n; ++j) row += h(i, j) * h(j, i);
    t += sigma_diag[i] * row;
  }
  return t;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size() && x.size() >= 2);
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace flatopt
