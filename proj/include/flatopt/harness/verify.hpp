#pragma once

// `verify` suites. Every check reports a nonnegative `value` (a residual, a
// failure count, or a ratio) and passes iff value <= tolerance.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "flatopt/flatness.hpp"
#include "flatopt/harness/io.hpp"
#include "flatopt/objective.hpp"
#include "flatopt/pacbayes.hpp"
#include "flatopt/rng.hpp"
#include "flatopt/toy_landscape.hpp"
#include "flatopt/trajectory.hpp"

namespace flatopt::harness {

struct Check {
  std::string check;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline Check make_check(std::string name, double value, double tolerance) {
  return {std::move(name), value, tolerance, value <= tolerance};
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"prop1", "prop2", "prop3", "prop4", "upperbound", "kl", "bound"};
  return names;
}

namespace suites {

inline Vec halving(double start, int levels) {
  Vec r;
  for (int k = 0; k < levels; ++k) r.push_back(start / std::ldexp(1.0, k));
  return r;
}

inline std::vector<Check> prop1() {
  const Vec rhos = halving(0.1, 4);
  std::vector<Check> out;
  {
    const QuarticObjective f(1.0, {1.0, 2.0}, {0.0, 0.0});
    const Vec mu{0.7, -0.4};
    const auto r = prop1_check(f, mu, Vec{1.0, 1.0}, rhos);
    out.push_back(make_check("prop1.quartic.|slope-2|", std::abs(r.slope - 2.0), 0.2));
  }
  {
    const auto f = toy_landscape();
    const Vec mu{1.0, 0.5};
    const auto r = prop1_check(f, mu, Vec{1.0, 1.0}, rhos);
    out.push_back(make_check("prop1.toy.|slope-2|", std::abs(r.slope - 2.0), 0.2));
  }
  {
    const auto f = quadratic_objective({1.0, 3.0}, {0.5, -0.2});
    const Vec mu{0.3, 0.8};
    const auto r = prop1_check(f, mu, Vec{1.0, 1.0}, rhos);
    out.push_back(make_check("prop1.quadratic.|slope-2|", std::abs(r.slope - 2.0), 0.2));
  }
  return out;
}

// Shared p = 2 quadratic for the trajectory suites.
inline QuadraticObjective trajectory_quadratic() { return quadratic_objective({1.0, 3.0}, {0.0, 0.0}); }

inline std::vector<Check> trajectory_checks(const std::string& prefix, TrajectoryKind kind, double rho,
                                            bool intermediate) {
  const auto f = trajectory_quadratic();
  const Vec mu0{1.0, 1.0};
  const Vec sigma(2, rho * rho / 2.0);
  const auto study = backward_error_order_study(kind, f, mu0, sigma, 0.01, 100, 3);
  const auto& d0 = study.deviations.front();
  std::vector<Check> out;
  if (!intermediate) {
    out.push_back(make_check(prefix + ".modified/original", d0.from_modified / d0.from_original, 0.5));
    out.push_back(make_check(prefix + ".|order-2|", std::abs(study.modified_order - 2.0), 0.4));
  } else {
    out.push_back(make_check(prefix + ".intermediate/original", d0.from_intermediate / d0.from_original, 0.5));
    out.push_back(make_check(prefix + ".|intermediate_order-2|", std::abs(study.intermediate_order - 2.0), 0.4));
  }
  return out;
}

/// SAM: the closed-form modified loss at small rho, and the intermediate
/// form (which keeps the cross terms) at a moderate rho.
inline std::vector<Check> prop2() {
  auto out = trajectory_checks("prop2.sam.rho=1e-4", TrajectoryKind::Sam, 1e-4, false);
  auto more = trajectory_checks("prop2.sam.rho=0.05", TrajectoryKind::Sam, 0.05, true);
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

inline std::vector<Check> prop4() {
  return trajectory_checks("prop4.mfvi.rho=0.05", TrajectoryKind::ExpectedMfvi, 0.05, false);
}

/// Symmetric positive definite B^T B / p + 0.1 I with Gaussian B.
inline Matrix random_spd(std::size_t p, const CounterRng& rng, std::uint64_t& counter) {
  Matrix b(p);
  for (auto& x : b.data) x = rng.normal(counter++);
  Matrix a(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k) s += b(k, i) * b(k, j);
      a(i, j) = s / static_cast<double>(p) + (i == j ? 0.1 : 0.0);
    }
  return a;
}

inline std::vector<Check> prop3() {
  const CounterRng rng(33, 0), dims(33, 1);
  std::uint64_t counter = 0;
  int failures = 0;
  double worst = 0.0;
  for (int c = 0; c < 20; ++c) {
    const std::size_t p = 1 + dims.below(c, 16);
    const Matrix a = random_spd(p, rng, counter);
    Vec b(p), mu(p), sigma(p);
    for (std::size_t i = 0; i < p; ++i) {
      b[i] = rng.normal(counter++);
      mu[i] = rng.normal(counter++);
      sigma[i] = 0.001 + 0.1 * rng.uniform(counter++);
    }
    const DenseQuadraticObjective f(a, b);
    const auto r = prop3_check(f, mu, sigma, 100'000, 1000 + c);
    worst = std::max(worst, std::abs(r.z_score));
    if (!(std::abs(r.z_score) < 3.0)) ++failures;
  }
  return {make_check("prop3.dense_quadratics.|z|>=3_count", failures, 1.0),
          make_check("prop3.dense_quadratics.max|z|", worst, std::numeric_limits<double>::infinity())};
}

inline std::vector<Check> upperbound() {
  std::vector<Check> out;
  int convex_failures = 0;
  auto run = [&](const Objective& f, const Vec& mu, double rho, std::uint64_t seed) {
    const Vec sigma(f.dim(), rho * rho / static_cast<double>(f.dim()));
    if (!upper_bound_check(f, mu, sigma, 20'000, seed).holds) ++convex_failures;
  };
  const auto quad = quadratic_objective({1.0, 3.0}, {0.5, -0.2});
  const QuarticObjective quartic(1.0, {1.0, 2.0}, {0.3, 0.0});
  const LinearObjective linear({1.0, -2.0});
  const auto quad3 = quadratic_objective({1.0, 2.0, 3.0}, {0.0, 0.0, 0.0});
  std::uint64_t seed = 1;
  for (double rho : {0.05, 0.3, 1.0}) {
    run(quad, {0.4, -0.3}, rho, seed++);
    run(quartic, {0.7, -0.4}, rho, seed++);
    run(linear, {0.0, 0.0}, rho, seed++);
    run(quad3, {0.1, 0.2, -0.5}, rho, seed++);
  }
  out.push_back(make_check("upperbound.convex.failures", convex_failures, 0.0));

  const auto toy = toy_landscape();
  const CounterRng rng(44, 0);
  int toy_failures = 0;
  for (int k = 0; k < 50; ++k) {
    const Vec mu{-4.0 + 8.0 * rng.uniform(3 * k), -4.0 + 8.0 * rng.uniform(3 * k + 1)};
    const double rho = rng.uniform(3 * k + 2);
    const Vec sigma(2, rho * rho / 2.0);
    if (!upper_bound_check(toy, mu, sigma, 20'000, 500 + k).holds) ++toy_failures;
  }
  out.push_back(make_check("upperbound.toy.failures_of_50", toy_failures, 2.0));
  return out;
}

/// KL[N(m, s2) || N(0, s02)] by adaptive Gauss-Kronrod over the posterior.
inline double kl_quadrature(double m, double s2, double s02) {
  const double s = std::sqrt(s2);
  auto integrand = [&](double t) {
    const double x = m + s * t;
    const double log_ratio = -0.5 * std::log(s2 / s02) - 0.5 * t * t + 0.5 * x * x / s02;
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi) * log_ratio;
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 15, 1e-14);
}

inline std::vector<Check> kl() {
  std::vector<Check> out;
  const CounterRng rng(55, 0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double m = 2.0 * rng.normal(4 * k);
    const double s2 = std::exp(2.0 * rng.normal(4 * k + 1) * 0.7);
    const double s02 = std::exp(2.0 * rng.normal(4 * k + 2) * 0.7);
    const Vec mu{m}, sig{s2};
    worst = std::max(worst, std::abs(gaussian_kl(mu, sig, s02) - kl_quadrature(m, s2, s02)));
  }
  out.push_back(make_check("kl.scalar_quadrature.max_abs_err", worst, 1e-8));
  out.push_back(make_check("kl.diag(2,2).|kl-(1-ln2)|",
                           std::abs(gaussian_kl(Vec{0.0, 0.0}, Vec{2.0, 2.0}, 1.0) - (1.0 - std::log(2.0))), 1e-10));
  out.push_back(make_check("kl.mu=1.|kl-0.5|", std::abs(gaussian_kl(Vec{1.0}, Vec{1.0}, 1.0) - 0.5), 1e-12));
  out.push_back(make_check("kl.at_prior", std::abs(gaussian_kl(Vec{0.0, 0.0, 0.0}, Vec{0.5, 0.5, 0.5}, 0.5)), 0.0));
  int negative = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t p = 1 + rng.below(1'000'000 + k, 8);
    Vec mu(p), sig(p);
    for (std::size_t i = 0; i < p; ++i) {
      mu[i] = rng.normal(2'000'000 + 16 * k + i);
      sig[i] = std::exp(rng.normal(3'000'000 + 16 * k + i));
    }
    if (!(gaussian_kl(mu, sig, 1.0) > 0.0)) ++negative;
  }
  out.push_back(make_check("kl.random_nonpositive_count", negative, 0.0));
  return out;
}

inline std::vector<Check> bound() {
  std::vector<Check> out;
  out.push_back(make_check("bound.gamma(2,100).|gamma-3.5601|", std::abs(gamma_radius(2, 100) - 3.5601), 1e-3));
  {
    BoundInputs in{0, 101, 0.5, 0.0, 0.0, 0.0};
    const double expect = std::sqrt(std::log(202.0) / 200.0);
    out.push_back(make_check("bound.n=101.|bound-sqrt(ln202/200)|", std::abs(pac_bound(in) - expect), 1e-12));
  }
  {
    BoundInputs in{10, 1'000'000'000, 0.05, 0.3, 5.0, 1.0};
    out.push_back(make_check("bound.large_n.|bound-empirical|", std::abs(pac_bound(in) - 0.3), 1e-3));
  }
  // 10 x 10 x 10 sweep over (n, kl, delta); count monotonicity violations.
  int violations = 0;
  const std::size_t ns[] = {2, 5, 10, 30, 100, 300, 1000, 10'000, 100'000, 1'000'000};
  for (int a = 0; a < 10; ++a)
    for (int b = 0; b < 10; ++b)
      for (int c = 0; c < 10; ++c) {
        const double kl_v = 0.5 * b, delta = 0.01 + 0.09 * c;
        BoundInputs in{5, ns[a], delta, 0.2, kl_v, 1.0};
        const double here = pac_bound(in);
        if (a + 1 < 10) {
          BoundInputs m = in;
          m.n = ns[a + 1];
          if (pac_bound(m) > here) ++violations;
        }
        BoundInputs k = in;
        k.kl_value = kl_v + 0.5;
        if (!(pac_bound(k) > here)) ++violations;
        BoundInputs d = in;
        d.delta = delta * 0.5;
        if (!(pac_bound(d) > here)) ++violations;
      }
  out.push_back(make_check("bound.monotonicity_violations", violations, 0.0));
  return out;
}

}  // namespace suites

inline std::vector<Check> run_suite(const std::string& name) {
  if (name == "prop1") return suites::prop1();
  if (name == "prop2") return suites::prop2();
  if (name == "prop3") return suites::prop3();
  if (name == "prop4") return suites::prop4();
  if (name == "upperbound") return suites::upperbound();
  if (name == "kl") return suites::kl();
  if (name == "bound") return suites::bound();
  throw Error(ErrorKind::UnknownSuite, "unknown suite '" + name + "'");
}

/// Runs one suite or, for "all", every suite in parallel; the result order
/// does not depend on scheduling.
inline std::vector<Check> run_verify(const std::string& name) {
  if (name != "all") return run_suite(name);
  const auto& names = suite_names();
  std::vector<std::vector<Check>> parts(names.size());
  parallel_for(names.size(), [&](std::size_t i) { parts[i] = run_suite(names[i]); });
  std::vector<Check> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline nlohmann::ordered_json verify_report(const std::string& suite, const std::vector<Check>& checks) {
  nlohmann::ordered_json j;
  j["suite"] = suite;
  bool all = true;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : checks) {
    nlohmann::ordered_json row;
    row["check"] = c.check;
    row["value"] = c.value;
    if (std::isinf(c.tolerance))
      row["tolerance"] = nullptr;  // informational
    else
      row["tolerance"] = c.tolerance;
    row["pass"] = c.pass;
    all = all && c.pass;
    arr.push_back(std::move(row));
  }
  j["pass"] = all;
  j["checks"] = std::move(arr);
  return j;
}

}  // namespace flatopt::harness
