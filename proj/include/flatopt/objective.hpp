#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "flatopt/core_math.hpp"

namespace flatopt {

/// Indices of the examples in a mini-batch. Empty means the full data set;
/// data-free objectives ignore it.
using Batch = std::span<const std::size_t>;

/// Twice-differentiable scalar loss. Implementations are stateless
/// evaluators and may be called concurrently at different points.
class Objective {
 public:
  /// Exact Hessians are only offered up to this many parameters.
  static constexpr std::size_t kHessianLimit = 64;

  virtual ~Objective() = default;

  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> theta, Batch batch = {}) const = 0;
  virtual Vec gradient(std::span<const double> theta, Batch batch = {}) const = 0;

  /// Gradients of the individual loss terms whose mean is gradient(). Objectives
  /// without a data set report a single term.
  virtual std::vector<Vec> per_example_gradients(std::span<const double> theta, Batch batch = {}) const {
    return {gradient(theta, batch)};
  }

  bool has_hessian() const { return dim() <= kHessianLimit; }

  Matrix hessian(std::span<const double> theta, Batch batch = {}) const {
    if (!has_hessian())
      throw Error(ErrorKind::DimensionTooLarge, "exact Hessian requested for p > " + std::to_string(kHessianLimit));
    return compute_hessian(theta, batch);
  }

  /// H v. The default differentiates the gradient along v/|v| with a central
  /// difference of step 1e-5 and rescales by |v|.
  virtual Vec hessian_vector_product(std::span<const double> theta, std::span<const double> v,
                                     Batch batch = {}) const {
    const double nv = vec::norm(v);
    if (nv == 0.0) return Vec(v.size(), 0.0);
    constexpr double h = 1e-5;
    Vec plus(theta.begin(), theta.end());
    Vec minus(theta.begin(), theta.end());
    vec::axpy(h / nv, v, plus);
    vec::axpy(-h / nv, v, minus);
    const Vec gp = gradient(plus, batch);
    const Vec gm = gradient(minus, batch);
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = nv * (gp[i] - gm[i]) / (2.0 * h);
    return out;
  }

 protected:
  /// Central-difference Jacobian of the analytic gradient, symmetrized.
  /// Objectives with a closed-form Hessian override this.
  virtual Matrix compute_hessian(std::span<const double> theta, Batch batch) const {
    const std::size_t p = dim();
    Matrix h(p);
    Vec probe(theta.begin(), theta.end());
    for (std::size_t j = 0; j < p; ++j) {
      const double step = 1e-5 * (1.0 + std::abs(theta[j]));
      probe[j] = theta[j] + step;
      const Vec gp = gradient(probe, batch);
      probe[j] = theta[j] - step;
      const Vec gm = gradient(probe, batch);
      probe[j] = theta[j];
      for (std::size_t i = 0; i < p; ++i) h(i, j) = (gp[i] - gm[i]) / (2.0 * step);
    }
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j) {
        const double s = 0.5 * (h(i, j) + h(j, i));
        h(i, j) = s;
        h(j, i) = s;
      }
    return h;
  }

  void check_dim(std::span<const double> theta) const {
    if (theta.size() != dim()) throw Error(ErrorKind::ShapeMismatch, "parameter length differs from objective dimension");
  }
};

/// L = 1/2 theta^T diag(A) theta - b^T theta
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(Vec a_diag, Vec b) : a_(std::move(a_diag)), b_(std::move(b)) {
    if (a_.empty() || a_.size() != b_.size()) throw Error(ErrorKind::ShapeMismatch, "quadratic A/b length mismatch");
  }

  std::size_t dim() const override { return a_.size(); }
  const Vec& curvature() const noexcept { return a_; }

  double value(std::span<const double> theta, Batch = {}) const override {
    check_dim(theta);
    double v = 0.0;
    for (std::size_t i = 0; i < a_.size(); ++i) v += 0.5 * a_[i] * theta[i] * theta[i] - b_[i] * theta[i];
    return v;
  }

  Vec gradient(std::span<const double> theta, Batch = {}) const override {
    check_dim(theta);
    Vec g(a_.size());
    for (std::size_t i = 0; i < a_.size(); ++i) g[i] = a_[i] * theta[i] - b_[i];
    return g;
  }

  Vec hessian_vector_product(std::span<const double>, std::span<const double> v, Batch = {}) const override {
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = a_[i] * v[i];
    return out;
  }

 protected:
  Matrix compute_hessian(std::span<const double>, Batch) const override { return Matrix::diagonal(a_); }

 private:
  Vec a_;
  Vec b_;
};

/// Quadratic with a diagonal curvature; A_diag may contain negative entries
/// (saddles), which the factory below forbids.
inline QuadraticObjective quadratic_objective(Vec a_diag, Vec b) {
  for (double a : a_diag)
    if (!(a > 0.0)) throw Error(ErrorKind::NonPositiveVariance, "quadratic_objective needs positive curvature");
  return QuadraticObjective(std::move(a_diag), std::move(b));
}

/// L = 1/2 theta^T A theta - b^T theta with a dense symmetric A.
class DenseQuadraticObjective final : public Objective {
 public:
  DenseQuadraticObjective(Matrix a, Vec b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.n == 0 || a_.n != b_.size()) throw Error(ErrorKind::ShapeMismatch, "dense quadratic A/b size mismatch");
    if (a_.max_asymmetry() > 0.0) throw Error(ErrorKind::ShapeMismatch, "dense quadratic A must be symmetric");
  }

  std::size_t dim() const override { return b_.size(); }

  double value(std::span<const double> theta, Batch = {}) const override {
    check_dim(theta);
    const Vec at = a_.apply(theta);
    return 0.5 * vec::dot(theta, at) - vec::dot(b_, theta);
  }

  Vec gradient(std::span<const double> theta, Batch = {}) const override {
    check_dim(theta);
    return vec::sub(a_.apply(theta), b_);
  }

  Vec hessian_vector_product(std::span<const double>, std::span<const double> v, Batch = {}) const override {
    return a_.apply(v);
  }

 protected:
  Matrix compute_hessian(std::span<const double>, Batch) const override { return a_; }

 private:
  Matrix a_;
  Vec b_;
};

/// L = c^T theta
class LinearObjective final : public Objective {
 public:
  explicit LinearObjective(Vec c) : c_(std::move(c)) {
    if (c_.empty()) throw Error(ErrorKind::ShapeMismatch, "empty linear objective");
  }

  std::size_t dim() const override { return c_.size(); }
  double value(std::span<const double> theta, Batch = {}) const override {
    check_dim(theta);
    return vec::dot(c_, theta);
  }
  Vec gradient(std::span<const double> theta, Batch = {}) const override {
    check_dim(theta);
    return c_;
  }
  Vec hessian_vector_product(std::span<const double>, std::span<const double> v, Batch = {}) const override {
    return Vec(v.size(), 0.0);
  }

 protected:
  Matrix compute_hessian(std::span<const double>, Batch) const override { return Matrix(c_.size()); }

 private:
  Vec c_;
};

/// L = a/4 |theta|^4 + 1/2 theta^T diag(b) theta - c^T theta
/// A smooth non-quadratic test surface with coupled coordinates.
class QuarticObjective final : public Objective {
 public:
  QuarticObjective(double a, Vec b, Vec c) : a_(a), b_(std::move(b)), c_(std::move(c)) {
    if (b_.empty() || b_.size() != c_.size()) throw Error(ErrorKind::ShapeMismatch, "quartic b/c length mismatch");
  }

  std::size_t dim() const override { return b_.size(); }

  double value(std::span<const double> theta, Batch = {}) const override {
    check_dim(theta);
    const double r2 = vec::dot(theta, theta);
    double v = 0.25 * a_ * r2 * r2;
    for (std::size_t i = 0; i < b_.size(); ++i) v += 0.5 * b_[i] * theta[i] * theta[i] - c_[i] * theta[i];
    return v;
  }

  Vec gradient(std::span<const double> theta, Batch = {}) const override {
    check_dim(theta);
    const double r2 = vec::dot(theta, theta);
    Vec g(b_.size());
    for (std::size_t i = 0; i < b_.size(); ++i) g[i] = a_ * r2 * theta[i] + b_[i] * theta[i] - c_[i];
    return g;
  }

 protected:
  Matrix compute_hessian(std::span<const double> theta, Batch) const override {
    const std::size_t p = b_.size();
    const double r2 = vec::dot(theta, theta);
    Matrix h(p);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j)
        h(i, j) = 2.0 * a_ * theta[i] * theta[j] + (i == j ? a_ * r2 + b_[i] : 0.0);
    return h;
  }

 private:
  double a_;
  Vec b_;
  Vec c_;
};

}  // namespace flatopt
