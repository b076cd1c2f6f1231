// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "flatopt/harness/train.hpp"
#include "flatopt/harness/verify.hpp"
#include "flatopt/optimizer.hpp"
#include "flatopt/toy_landscape.hpp"

using namespace flatopt;
using namespace flatopt::harness;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome from_checks(const std::vector<Check>& checks) {
  Outcome o{true, ""};
  for (const auto& c : checks) {
    o.pass = o.pass && c.pass;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += fmt("%s=%.4g", c.check.c_str(), c.value);
  }
  return o;
}

Outcome constraint_exactness() {
  const CounterRng rng(1001, 0);
  std::uint64_t k = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 10'000; ++trial) {
    const std::size_t p = 1 + rng.below(k++, 512);
    Vec mu(p), g(p), s(p);
    for (std::size_t i = 0; i < p; ++i) {
      mu[i] = rng.normal(k++);
      const double scale = std::exp(2.0 * rng.normal(k++));
      g[i] = rng.normal(k++) * scale;
      s[i] = std::exp(3.0 * rng.normal(k++));
    }
    const auto e = sam_perturbation(mu, g, s);
    if (e.degenerate) return {false, "unexpected degenerate gradient"};
    double q = 0.0;
    for (std::size_t i = 0; i < p; ++i) q += e.epsilon[i] * e.epsilon[i] / s[i];
    worst = std::max(worst, std::abs(q - static_cast<double>(p)) / static_cast<double>(p));
  }
  return {worst <= 1e-9, fmt("max |q-p|/p = %.3g over 10000 cases", worst)};
}

Outcome basin_preference() {
  const auto toy = toy_landscape();
  const double rho = 8 * 0.02;
  std::vector<OptimizerConfig> configs(3);
  for (auto& c : configs) {
    c.lr_mu = 0.1;
    c.momentum = 0.9;
  }
  configs[1].perturbation = Perturbation::WorstCase;
  configs[1].covariance = CovarianceSpec::isotropic(rho);
  configs[2].perturbation = Perturbation::Gaussian;
  configs[2].covariance = CovarianceSpec::isotropic(rho);
  int wide[3] = {0, 0, 0};
  const CounterRng inits(2024, 0);
  for (int i = 0; i < 500; ++i) {
    const Vec x0{-4.0 + 8.0 * inits.uniform(2 * i), -4.0 + 8.0 * inits.uniform(2 * i + 1)};
    for (int m = 0; m < 3; ++m) {
      configs[m].seed = 100 + i;
      Vec x = run_trajectory(toy, configs[m], ParamVector(x0), 600).back();
      // Basin of the final iterate under plain gradient descent.
      for (int k = 0; k < 4000; ++k) vec::axpy(-0.02, toy.gradient(x), x);
      if (x[0] > 0.0) ++wide[m];
    }
  }
  return {wide[1] > wide[0] && wide[2] > wide[0],
          fmt("wide-basin counts of 500: sgd=%d sam=%d rsam=%d", wide[0], wide[1], wide[2])};
}

Outcome training() {
  std::string detail;
  bool pass = true;
  for (const char* name : {"sgd", "sam", "rsam", "mfvi", "vsam"}) {
    double train = 0.0, test = 0.0;
    for (int seed = 1; seed <= 3; ++seed) {
      const Config c = Config::parse_string(std::string("optimizer = ") + name + "\nseed = " + std::to_string(seed) + "\n")
                           .resolve(train_schema());
      const RunRecord r = run_training(c);
      train += r.summary.final_train_acc / 3.0;
      test += r.summary.final_test_acc / 3.0;
      if (seed == 1 && metrics_csv(run_training(c)) != metrics_csv(r)) {
        pass = false;
        detail += fmt("%s not reproducible; ", name);
      }
    }
    pass = pass && train >= 0.95 && test >= 0.90;
    detail += fmt("%s train=%.4f test=%.4f; ", name, train, test);
  }
  return {pass, detail};
}

Outcome collapse() {
  const auto f = quadratic_objective({1.0, 3.0}, {0.2, -0.1});
  const ParamVector mu0(Vec{1.0, -1.0});
  const KlPenalty kl{1.0, 100.0};
  OptimizerConfig sgd;
  sgd.lr_mu = 0.05;
  sgd.momentum = 0.9;
  sgd.penalty = L2Penalty{kl.alpha()};
  const auto base = run_trajectory(f, sgd, mu0, 200);
  bool pass = true;
  std::string detail;
  for (double rho : {1e-2, 1e-3, 1e-4}) {
    auto sam = sgd;
    sam.perturbation = Perturbation::WorstCase;
    sam.covariance = CovarianceSpec::isotropic(rho);
    auto rsam = sam;
    rsam.perturbation = Perturbation::Gaussian;
    rsam.seed = 3;
    auto vsam = sam;
    vsam.covariance = CovarianceSpec::diagonal(Vec(2, rho * rho / 2.0));
    vsam.learn_sigma = true;
    vsam.lr_sigma = 0.01;
    vsam.penalty = kl;
    double worst = 0.0;
    for (const auto* c : {&sam, &rsam, &vsam}) {
      const auto path = run_trajectory(f, *c, mu0, 200);
      for (std::size_t k = 0; k < path.size(); ++k) worst = std::max(worst, vec::norm(vec::sub(path[k], base[k])));
    }
    pass = pass && worst <= 10.0 * rho;
    detail += fmt("rho=%g max_dev/rho=%.3g; ", rho, worst / rho);
  }
  return {pass, detail};
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"constraint_exactness", 5, constraint_exactness},
      {"prop1_order", 30, [] { return from_checks(run_suite("prop1")); }},
      {"prop3_smoothing", 60, [] { return from_checks(run_suite("prop3")); }},
      {"trajectory_modified_flow",
       120,
       [] {
         auto checks = run_suite("prop2");
         const auto more = run_suite("prop4");
         checks.insert(checks.end(), more.begin(), more.end());
         return from_checks(checks);
       }},
      {"gaussian_kl", 5, [] { return from_checks(run_suite("kl")); }},
      {"pac_bound", 2, [] { return from_checks(run_suite("bound")); }},
      {"upper_bound", 60, [] { return from_checks(run_suite("upperbound")); }},
      {"basin_preference", 120, basin_preference},
      {"training_two_moons", 600, training},
      {"small_rho_collapse", 10, collapse},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s %s [%.2fs / %.0fs%s] %s\n", pass ? "PASS" : "FAIL", c.name, secs, c.budget_s,
                in_time ? "" : " over budget", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
