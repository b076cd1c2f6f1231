#pragma once

// `landscape` job: four grids over one lattice of the 2-D toy surface.
//   A  L(mu)
//   B  Monte-Carlo E L(mu + Sigma^{1/2} eta), same draws at every grid point
//   C  max over |eps| <= rho of L(mu + eps), brute force
//   D  L(mu) + rho |grad L(mu)|
// with Sigma = (rho^2 / 2) I.

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "flatopt/dataset.hpp"
#include "flatopt/flatness.hpp"
#include "flatopt/harness/config.hpp"
#include "flatopt/harness/io.hpp"
#include "flatopt/toy_landscape.hpp"

namespace flatopt::harness {

inline const std::vector<KeySpec>& landscape_schema() {
  static const std::vector<KeySpec> schema = {
      {"grid", "lo", "-4"},
      {"grid", "hi", "4"},
      {"grid", "resolution", "200"},
      {"perturbation", "rho", "auto"},
      {"perturbation", "rho_cells", "8"},
      {"perturbation", "grid_scale", "0.02"},
      {"perturbation", "mc_samples", "200"},
      {"perturbation", "ball_rings", "16"},
      {"toy", "sharp_x", "-2"},
      {"toy", "sharp_y", "0"},
      {"toy", "wide_x", "2"},
      {"toy", "wide_y", "0"},
      {"toy", "sharp_depth", "1"},
      {"toy", "wide_depth", "1"},
      {"toy", "sharp_width", "0.3"},
      {"toy", "wide_width", "1.5"},
      {"toy", "confinement", "0.01"},
      {"run", "seed", "1"},
  };
  return schema;
}

inline ToyLandscape2D toy_params(const Config& c) {
  ToyLandscape2D t;
  t.sharp_center = {c.real("sharp_x"), c.real("sharp_y")};
  t.wide_center = {c.real("wide_x"), c.real("wide_y")};
  t.sharp_depth = c.real("sharp_depth");
  t.wide_depth = c.real("wide_depth");
  t.sharp_width = c.real("sharp_width");
  t.wide_width = c.real("wide_width");
  t.confinement = c.real("confinement");
  return t;
}

/// rho = rho_cells * grid_scale unless given explicitly.
inline double landscape_rho(const Config& c) {
  const double rho = c.str("rho") == "auto" ? c.real("rho_cells") * c.real("grid_scale") : c.real("rho");
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw Error(ErrorKind::ConfigError, "key 'rho' must be finite and >= 0");
  return rho;
}

struct LandscapeOptions {
  double lo = -4.0;
  double hi = 4.0;
  std::size_t resolution = 200;
  double rho = 0.16;
  std::size_t mc_samples = 200;
  std::size_t ball_rings = 16;  // disc lattice spacing is rho / ball_rings
  std::uint64_t seed = 1;
};

struct Grid {
  Vec xs;  // lattice coordinates, shared by both axes
  Vec values;  // row-major, values[i * n + j] at (xs[i], xs[j])

  double at(std::size_t i, std::size_t j) const { return values[i * xs.size() + j]; }
};

struct LandscapePanels {
  Grid loss, smoothed, ball_max, taylor;
};

/// Offsets covering the closed disc of radius rho: a square lattice of
/// spacing rho / rings clipped to the disc, plus points on the boundary circle.
inline std::vector<std::array<double, 2>> disc_offsets(double rho, std::size_t rings) {
  std::vector<std::array<double, 2>> out{{0.0, 0.0}};
  if (rho == 0.0) return out;
  const double h = rho / static_cast<double>(rings);
  const int r = static_cast<int>(rings);
  for (int a = -r; a <= r; ++a)
    for (int b = -r; b <= r; ++b)
      if ((a != 0 || b != 0) && a * a + b * b <= r * r) out.push_back({a * h, b * h});
  const std::size_t boundary = 16 * rings;
  for (std::size_t k = 0; k < boundary; ++k) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(boundary);
    out.push_back({rho * std::cos(t), rho * std::sin(t)});
  }
  return out;
}

inline LandscapePanels compute_landscape(const Objective& f, const LandscapeOptions& opt) {
  if (f.dim() != 2) throw Error(ErrorKind::DimensionTooLarge, "landscape grids need a 2-parameter objective");
  if (opt.resolution < 2) throw Error(ErrorKind::ConfigError, "key 'resolution' must be >= 2");
  if (!(opt.hi > opt.lo)) throw Error(ErrorKind::ConfigError, "grid needs hi > lo");
  const std::size_t n = opt.resolution;
  Vec xs(n);
  for (std::size_t i = 0; i < n; ++i)
    xs[i] = opt.lo + (opt.hi - opt.lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  LandscapePanels out;
  for (Grid* g : {&out.loss, &out.smoothed, &out.ball_max, &out.taylor}) {
    g->xs = xs;
    g->values.assign(n * n, 0.0);
  }
  const Vec sigma(2, opt.rho * opt.rho / 2.0);
  const auto offsets = disc_offsets(opt.rho, std::max<std::size_t>(1, opt.ball_rings));
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      const Vec mu{xs[i], xs[j]};
      const std::size_t k = i * n + j;
      const double l = f.value(mu);
      out.loss.values[k] = l;
      out.smoothed.values[k] = opt.rho == 0.0 ? l : mc_smoothed_loss(f, mu, sigma, opt.mc_samples, opt.seed).mean;
      double best = l;
      for (const auto& o : offsets) {
        const double pt[2] = {mu[0] + o[0], mu[1] + o[1]};
        best = std::max(best, f.value(pt));
      }
      out.ball_max.values[k] = best;
      out.taylor.values[k] = l + opt.rho * vec::norm(f.gradient(mu));
    }
  });
  return out;
}

inline std::string grid_csv(const Grid& g) {
  std::string out = "x,y,value\n";
  const std::size_t n = g.xs.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out += format_double(g.xs[i]) + "," + format_double(g.xs[j]) + "," + format_double(g.at(i, j)) + "\n";
  return out;
}

struct GridArgmin {
  double x = 0.0, y = 0.0, value = 0.0;
};

inline GridArgmin grid_argmin(const Grid& g) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < g.values.size(); ++k)
    if (g.values[k] < g.values[best]) best = k;
  const std::size_t n = g.xs.size();
  return {g.xs[best / n], g.xs[best % n], g.values[best]};
}

/// Grid minimum restricted to points closer to `center` than to `other`.
inline GridArgmin basin_min(const Grid& g, std::array<double, 2> center, std::array<double, 2> other) {
  GridArgmin best{0.0, 0.0, std::numeric_limits<double>::infinity()};
  const std::size_t n = g.xs.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x = g.xs[i], y = g.xs[j];
      const double dc = std::hypot(x - center[0], y - center[1]), d_o = std::hypot(x - other[0], y - other[1]);
      if (dc < d_o && g.at(i, j) < best.value) best = {x, y, g.at(i, j)};
    }
  return best;
}

inline LandscapeOptions landscape_options(const Config& c) {
  LandscapeOptions o;
  o.lo = c.real("lo");
  o.hi = c.real("hi");
  o.resolution = static_cast<std::size_t>(c.positive_integer("resolution"));
  o.rho = landscape_rho(c);
  o.mc_samples = static_cast<std::size_t>(c.positive_integer("mc_samples"));
  if (o.mc_samples < 2) throw Error(ErrorKind::ConfigError, "key 'mc_samples' must be >= 2");
  o.ball_rings = static_cast<std::size_t>(c.positive_integer("ball_rings"));
  o.seed = static_cast<std::uint64_t>(c.integer("seed"));
  return o;
}

inline const char* const kPanelFiles[4] = {"panel_a_loss.csv", "panel_b_smoothed.csv", "panel_c_ball_max.csv",
                                           "panel_d_taylor.csv"};

/// Runs the job and writes the four panel CSVs plus landscape.json.
inline LandscapePanels run_landscape(const Config& c, const std::filesystem::path& out_dir) {
  ToyLandscapeObjective f = [&] {
    try {
      return toy_landscape(toy_params(c));
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigError, e.what());
    }
  }();
  const auto opt = landscape_options(c);
  auto panels = compute_landscape(f, opt);
  const Grid* grids[4] = {&panels.loss, &panels.smoothed, &panels.ball_max, &panels.taylor};
  nlohmann::ordered_json j;
  j["config"] = c.to_json();
  j["rho"] = opt.rho;
  auto summary = nlohmann::ordered_json::array();
  const auto& t = f.params();
  for (int p = 0; p < 4; ++p) {
    atomic_write(out_dir / kPanelFiles[p], grid_csv(*grids[p]));
    const auto g = grid_argmin(*grids[p]);
    nlohmann::ordered_json row;
    row["file"] = kPanelFiles[p];
    row["argmin_x"] = g.x;
    row["argmin_y"] = g.y;
    row["min"] = g.value;
    row["sharp_basin_min"] = basin_min(*grids[p], t.sharp_center, t.wide_center).value;
    row["wide_basin_min"] = basin_min(*grids[p], t.wide_center, t.sharp_center).value;
    summary.push_back(std::move(row));
  }
  j["panels"] = std::move(summary);
  atomic_write(out_dir / "landscape.json", j.dump(2) + "\n");
  return panels;
}

}  // namespace flatopt::harness
