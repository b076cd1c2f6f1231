#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "flatopt/core_math.hpp"

namespace flatopt {

/// Labelled point cloud, inputs stored row-major (n x d).
struct Dataset {
  std::string generator;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t d = 0;
  int num_classes = 0;
  Vec inputs;
  std::vector<int> targets;

  std::span<const double> row(std::size_t i) const { return {inputs.data() + i * d, d}; }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Two interleaving half circles: the outer arc is (cos t, sin t), the inner
/// arc (1 - cos t, 0.5 - sin t), t evenly spaced on [0, pi]. Gaussian noise
/// with standard deviation `noise` is added per coordinate.
inline Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::ShapeMismatch, "two_moons needs n > 0");
  Dataset ds{"two_moons", seed, n, 2, 2, Vec(2 * n), std::vector<int>(n)};
  const std::size_t n_outer = (n + 1) / 2;
  const std::size_t n_inner = n - n_outer;
  const CounterRng rng(seed, 0);
  auto t_at = [](std::size_t k, std::size_t count) {
    return count <= 1 ? 0.0 : std::numbers::pi * static_cast<double>(k) / static_cast<double>(count - 1);
  };
  for (std::size_t i = 0; i < n; ++i) {
    double x, y;
    if (i < n_outer) {
      const double t = t_at(i, n_outer);
      x = std::cos(t);
      y = std::sin(t);
      ds.targets[i] = 0;
    } else {
      const double t = t_at(i - n_outer, n_inner);
      x = 1.0 - std::cos(t);
      y = 0.5 - std::sin(t);
      ds.targets[i] = 1;
    }
    if (noise > 0.0) {
      x += noise * rng.normal(2 * i);
      y += noise * rng.normal(2 * i + 1);
    }
    ds.inputs[2 * i] = x;
    ds.inputs[2 * i + 1] = y;
  }
  return ds;
}

/// Isotropic Gaussian clusters in d dimensions. Centres are uniform in
/// [-5, 5]^d; labels are assigned round-robin so class sizes differ by at
/// most one.
/// Centres come from `centre_seed` (default: `seed`), so train and test sets
/// drawn with different seeds can share one mixture.
inline Dataset make_blobs(std::size_t n, int k, double spread, std::uint64_t seed, std::size_t d = 2,
                          std::optional<std::uint64_t> centre_seed = std::nullopt) {
  if (n == 0 || k <= 0 || d == 0) throw Error(ErrorKind::ShapeMismatch, "blobs needs n, k, d > 0");
  Dataset ds{"blobs", seed, n, d, k, Vec(n * d), std::vector<int>(n)};
  const CounterRng centre_rng(centre_seed.value_or(seed), 0);
  const CounterRng noise_rng(seed, 1);
  Vec centres(static_cast<std::size_t>(k) * d);
  for (std::size_t i = 0; i < centres.size(); ++i) centres[i] = -5.0 + 10.0 * centre_rng.uniform(i);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(k));
    ds.targets[i] = label;
    for (std::size_t j = 0; j < d; ++j)
      ds.inputs[i * d + j] = centres[static_cast<std::size_t>(label) * d + j] + spread * noise_rng.normal(i * d + j);
  }
  return ds;
}

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

/// CSV with header `x_0,...,x_{d-1},label`, LF line endings.
inline void write_csv(const Dataset& ds, std::ostream& out) {
  for (std::size_t j = 0; j < ds.d; ++j) out << "x_" << j << ',';
  out << "label\n";
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t j = 0; j < ds.d; ++j) out << format_double(ds.inputs[i * ds.d + j]) << ',';
    out << ds.targets[i] << '\n';
  }
}

inline Dataset read_csv(std::istream& in, std::string generator = "csv") {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ShapeMismatch, "dataset CSV is empty");
  std::size_t columns = 1;
  for (char c : line) columns += (c == ',');
  if (columns < 2 || line.rfind("label") == std::string::npos)
    throw Error(ErrorKind::ShapeMismatch, "dataset CSV header must end with a label column");
  Dataset ds;
  ds.generator = std::move(generator);
  ds.d = columns - 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col < ds.d) {
        ds.inputs.push_back(std::stod(cell));
      } else if (col == ds.d) {
        const int label = std::stoi(cell);
        if (label < 0) throw Error(ErrorKind::ShapeMismatch, "negative label in dataset CSV");
        ds.targets.push_back(label);
        ds.num_classes = std::max(ds.num_classes, label + 1);
      }
      ++col;
    }
    if (col != columns) throw Error(ErrorKind::ShapeMismatch, "dataset CSV row has wrong column count");
  }
  ds.n = ds.targets.size();
  return ds;
}

}  // namespace flatopt
