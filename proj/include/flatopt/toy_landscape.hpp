#pragma once

// Two-well surface with one sharp and one wide minimum:
//   L(x) = -a1 exp(-|x-c1|^2 / (2 s1^2)) - a2 exp(-|x-c2|^2 / (2 s2^2)) + kappa |x|^2
// This is a surrogate for the classic sharp/flat illustration; the original
// closed form is not published, so the defaults are chosen to give exactly
// two certified minima on [-4, 4]^2.

#include <array>
#include <cmath>
#include <vector>

#include "flatopt/objective.hpp"

namespace flatopt {

struct ToyLandscape2D {
  std::array<double, 2> sharp_center{-2.0, 0.0};
  std::array<double, 2> wide_center{2.0, 0.0};
  double sharp_depth = 1.0;
  double wide_depth = 1.0;
  double sharp_width = 0.3;
  double wide_width = 1.5;
  double confinement = 0.01;
};

class ToyLandscapeObjective final : public Objective {
 public:
  explicit ToyLandscapeObjective(ToyLandscape2D params) : params_(params) {
    if (!(params_.sharp_width > 0.0) || !(params_.sharp_width < params_.wide_width))
      throw Error(ErrorKind::ShapeMismatch, "toy landscape needs 0 < sharp width < wide width");
    if (!(params_.sharp_depth > 0.0) || !(params_.wide_depth > 0.0) || params_.confinement < 0.0)
      throw Error(ErrorKind::ShapeMismatch, "toy landscape depths must be positive, confinement >= 0");
  }

  const ToyLandscape2D& params() const noexcept { return params_; }
  std::size_t dim() const override { return 2; }

  double value(std::span<const double> x, Batch = {}) const override {
    check_dim(x);
    double v = params_.confinement * (x[0] * x[0] + x[1] * x[1]);
    for (const auto& w : wells()) {
      const double dx = x[0] - w.c[0], dy = x[1] - w.c[1];
      v -= w.a * std::exp(-(dx * dx + dy * dy) / (2.0 * w.s * w.s));
    }
    return v;
  }

  Vec gradient(std::span<const double> x, Batch = {}) const override {
    check_dim(x);
    Vec g{2.0 * params_.confinement * x[0], 2.0 * params_.confinement * x[1]};
    for (const auto& w : wells()) {
      const double dx = x[0] - w.c[0], dy = x[1] - w.c[1];
      const double s2 = w.s * w.s;
      const double e = w.a * std::exp(-(dx * dx + dy * dy) / (2.0 * s2));
      g[0] += e * dx / s2;
      g[1] += e * dy / s2;
    }
    return g;
  }

 protected:
  Matrix compute_hessian(std::span<const double> x, Batch) const override {
    Matrix h(2);
    h(0, 0) = h(1, 1) = 2.0 * params_.confinement;
    for (const auto& w : wells()) {
      const double d[2] = {x[0] - w.c[0], x[1] - w.c[1]};
      const double s2 = w.s * w.s;
      const double e = w.a * std::exp(-(d[0] * d[0] + d[1] * d[1]) / (2.0 * s2));
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) h(i, j) += e * ((i == j ? 1.0 / s2 : 0.0) - d[i] * d[j] / (s2 * s2));
    }
    return h;
  }

 private:
  struct Well {
    std::array<double, 2> c;
    double a;
    double s;
  };

  std::array<Well, 2> wells() const {
    return {Well{params_.sharp_center, params_.sharp_depth, params_.sharp_width},
            Well{params_.wide_center, params_.wide_depth, params_.wide_width}};
  }

  ToyLandscape2D params_;
};

inline ToyLandscapeObjective toy_landscape(ToyLandscape2D params = {}) { return ToyLandscapeObjective(params); }

/// Largest eigenvalue of a symmetric 2x2 matrix.
inline double lambda_max_2x2(const Matrix& h) {
  const double tr = h(0, 0) + h(1, 1);
  const double det = h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
  return 0.5 * tr + std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
}

struct GridMinimum {
  std::array<double, 2> point;
  double value;
};

/// Local minima of L on a resolution x resolution lattice over [lo, hi]^2.
/// A point must not exceed any of its 8 neighbours and must be strictly below
/// the neighbours that precede it in scan order, so an exact tie (e.g. the
/// two lattice rows straddling a symmetry axis) yields one minimum, not zero.
inline std::vector<GridMinimum> grid_local_minima(const Objective& f, double lo, double hi, std::size_t resolution) {
  const double step = (hi - lo) / static_cast<double>(resolution - 1);
  std::vector<double> grid(resolution * resolution);
  for (std::size_t i = 0; i < resolution; ++i)
    for (std::size_t j = 0; j < resolution; ++j) {
      const double pt[2] = {lo + step * static_cast<double>(i), lo + step * static_cast<double>(j)};
      grid[i * resolution + j] = f.value(pt);
    }
  std::vector<GridMinimum> minima;
  for (std::size_t i = 1; i + 1 < resolution; ++i)
    for (std::size_t j = 1; j + 1 < resolution; ++j) {
      const double v = grid[i * resolution + j];
      bool is_min = true;
      for (int di = -1; di <= 1 && is_min; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const double nb = grid[(i + di) * resolution + (j + dj)];
          const bool precedes = di < 0 || (di == 0 && dj < 0);
          if (nb < v || (precedes && nb == v)) {
            is_min = false;
            break;
          }
        }
      if (is_min)
        minima.push_back({{lo + step * static_cast<double>(i), lo + step * static_cast<double>(j)}, v});
    }
  return minima;
}

/// Polishes a point to a nearby critical point with damped Newton steps.
inline std::array<double, 2> polish_minimum(const Objective& f, std::array<double, 2> x, int iterations = 50) {
  for (int it = 0; it < iterations; ++it) {
    const Vec g = f.gradient(x);
    const Matrix h = f.hessian(x);
    const double det = h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
    if (std::abs(det) < 1e-300) break;
    const double dx = (h(1, 1) * g[0] - h(0, 1) * g[1]) / det;
    const double dy = (-h(1, 0) * g[0] + h(0, 0) * g[1]) / det;
    x[0] -= dx;
    x[1] -= dy;
    if (std::hypot(dx, dy) < 1e-15) break;
  }
  return x;
}

}  // namespace flatopt
