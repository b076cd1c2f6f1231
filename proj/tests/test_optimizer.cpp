#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "flatopt/objective.hpp"
#include "flatopt/optimizer.hpp"

using namespace flatopt;

namespace {

OptimizerConfig sam_config(double rho, double lr, double momentum = 0.0) {
  OptimizerConfig c;
  c.perturbation = Perturbation::WorstCase;
  c.covariance = CovarianceSpec::isotropic(rho);
  c.lr_mu = lr;
  c.momentum = momentum;
  return c;
}

// Scalar-loop SAM on sum_i a_i x_i^2 / 2 with Sigma = rho^2/p I, written
// without any library vector helpers.
std::vector<Vec> reference_sam(const Vec& a, Vec x, double rho, double lr, double momentum, double alpha,
                               int steps) {
  const std::size_t p = a.size();
  Vec buf(p, 0.0);
  std::vector<Vec> out{x};
  for (int t = 0; t < steps; ++t) {
    double gn = 0.0;
    for (std::size_t i = 0; i < p; ++i) gn += a[i] * x[i] * a[i] * x[i];
    gn = std::sqrt(gn);
    for (std::size_t i = 0; i < p; ++i) {
      const double eps = gn > 0.0 ? rho * a[i] * x[i] / gn : 0.0;
      const double d = a[i] * (x[i] + eps) + 2.0 * alpha * x[i];
      buf[i] = momentum * buf[i] + d;
    }
    for (std::size_t i = 0; i < p; ++i) x[i] -= lr * buf[i];
    out.push_back(x);
  }
  return out;
}

}  // namespace

TEST(SamPerturbation, HandEvaluatedStep) {
  const auto f = quadratic_objective({1.0}, {0.0});
  auto c = sam_config(0.1, 0.1);
  auto s = init_state(c, ParamVector(Vec{1.0}));
  const auto info = step(s, f, {}, c);
  EXPECT_NEAR(s.mu[0], 0.89, 1e-15);
  EXPECT_EQ(info.gradient_evals, 2);
  EXPECT_FALSE(info.degenerate);
}

TEST(SamPerturbation, MatchesScalarReference) {
  const Vec a{1.0, 4.0, 0.5};
  const auto f = quadratic_objective(a, {0.0, 0.0, 0.0});
  auto c = sam_config(0.2, 0.05, 0.9);
  c.penalty = L2Penalty{0.01};
  const auto path = run_trajectory(f, c, ParamVector(Vec{1.0, -0.5, 2.0}), 60);
  const auto ref = reference_sam(a, {1.0, -0.5, 2.0}, 0.2, 0.05, 0.9, 0.01, 60);
  for (std::size_t k = 0; k < path.size(); ++k) EXPECT_LE(vec::max_abs_diff(path[k], ref[k]), 1e-12);
}

TEST(SamPerturbation, ConstraintIsTight) {
  const CounterRng rng(17, 0);
  std::uint64_t k = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t p = 1 + rng.below(k++, 512);
    Vec g(p), s(p);
    for (std::size_t i = 0; i < p; ++i) {
      const double scale = std::exp(3.0 * rng.normal(k++));
      g[i] = rng.normal(k++) * scale;
      s[i] = std::exp(4.0 * rng.normal(k++));
    }
    const auto e = sam_perturbation(Vec(p, 0.0), g, s);
    ASSERT_FALSE(e.degenerate);
    double q = 0.0;
    for (std::size_t i = 0; i < p; ++i) q += e.epsilon[i] * e.epsilon[i] / s[i];
    EXPECT_LE(std::abs(q - static_cast<double>(p)), 1e-9 * static_cast<double>(p));
  }
}

TEST(SamPerturbation, MaximizesLinearModelOverEllipsoid) {
  // Brute-force sweep of the ellipsoid boundary for the linear model g^T eps.
  const Vec g{0.7, -1.3}, s{0.04, 0.5};
  const auto e = sam_perturbation(Vec{0.0, 0.0}, g, s);
  double best = -1e300;
  Vec arg(2);
  const int n = 200'000;
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 * std::numbers::pi * k / n;
    const Vec pt{std::sqrt(2.0 * s[0]) * std::cos(t), std::sqrt(2.0 * s[1]) * std::sin(t)};
    const double v = vec::dot(g, pt);
    if (v > best) best = v, arg = pt;
  }
  EXPECT_NEAR(vec::dot(g, e.epsilon), best, 1e-9);
  EXPECT_LE(vec::max_abs_diff(e.epsilon, arg), 1e-4);
}

TEST(SamPerturbation, DegenerateGradient) {
  const auto e = sam_perturbation(Vec{1.0, 1.0}, Vec{0.0, 1e-14}, Vec{1.0, 1.0});
  EXPECT_TRUE(e.degenerate);
  EXPECT_EQ(e.epsilon, (Vec{0.0, 0.0}));
  const auto f = quadratic_objective({1.0, 1.0}, {0.0, 0.0});
  auto c = sam_config(0.1, 0.1);
  auto s = init_state(c, ParamVector(Vec{0.0, 0.0}));
  EXPECT_TRUE(step(s, f, {}, c).degenerate);
  EXPECT_EQ(s.mu.values(), (Vec{0.0, 0.0}));
  EXPECT_THROW(sam_perturbation(Vec{1.0}, Vec{1.0, 2.0}, Vec{1.0, 1.0}), Error);
}

TEST(RandomSam, MeanDirectionIsGradientAtMean) {
  const Vec a{1.0, 3.0};
  const auto f = quadratic_objective(a, {0.0, 0.0});
  OptimizerConfig c;
  c.perturbation = Perturbation::Gaussian;
  c.covariance = CovarianceSpec::isotropic(0.5);
  c.lr_mu = 1.0;
  const Vec mu{0.4, -0.2};
  const int n = 20'000;
  Vec mean(2, 0.0);
  for (int k = 0; k < n; ++k) {
    c.seed = static_cast<std::uint64_t>(k);
    auto s = init_state(c, ParamVector(mu));
    step(s, f, {}, c);
    for (int i = 0; i < 2; ++i) mean[i] += (mu[i] - s.mu[i]) / n;
  }
  const double sig = 0.5 * 0.5 / 2.0;
  for (int i = 0; i < 2; ++i) {
    const double se = a[i] * std::sqrt(sig / n);
    EXPECT_LT(std::abs(mean[i] - a[i] * mu[i]), 3.0 * se);
  }
}

TEST(RandomSam, DeterministicPerSeed) {
  const auto f = quadratic_objective({1.0, 2.0}, {0.0, 0.0});
  OptimizerConfig c;
  c.perturbation = Perturbation::Gaussian;
  c.covariance = CovarianceSpec::isotropic(0.3);
  c.momentum = 0.5;
  c.seed = 4;
  const auto a = run_trajectory(f, c, ParamVector(Vec{1.0, 1.0}), 30);
  const auto b = run_trajectory(f, c, ParamVector(Vec{1.0, 1.0}), 30);
  EXPECT_EQ(a, b);
  c.seed = 5;
  EXPECT_NE(a, run_trajectory(f, c, ParamVector(Vec{1.0, 1.0}), 30));
}

TEST(Mfvi, LogSigmaGradientMatchesFrozenNoiseDifferences) {
  const std::size_t p = 10;
  Vec a(p), mu(p), phi(p), eta(p);
  const CounterRng rng(9, 0);
  for (std::size_t i = 0; i < p; ++i) {
    a[i] = 0.5 + i;
    mu[i] = rng.normal(i);
    phi[i] = std::log(0.01 + 0.1 * rng.uniform(100 + i));
    eta[i] = rng.normal(200 + i);
  }
  const QuarticObjective f(0.3, a, Vec(p, 0.1));
  const Penalty pen = KlPenalty{0.7, 50.0};
  Vec sigma2(p), theta(p);
  for (std::size_t i = 0; i < p; ++i) {
    sigma2[i] = std::exp(phi[i]);
    theta[i] = mu[i] + std::sqrt(sigma2[i]) * eta[i];
  }
  const Vec g = mfvi_log_sigma_gradient(f.gradient(theta), eta, sigma2, pen);
  for (std::size_t i = 0; i < p; ++i) {
    const double h = 1e-5;
    Vec up = phi, dn = phi;
    up[i] += h;
    dn[i] -= h;
    const double fd =
        (mfvi_single_sample_loss(f, {}, mu, up, eta, pen) - mfvi_single_sample_loss(f, {}, mu, dn, eta, pen)) /
        (2.0 * h);
    EXPECT_LT(std::abs(fd - g[i]) / std::max(std::abs(g[i]), 1e-8), 1e-6) << i;
  }
}

TEST(Vsam, SigmaGradientMatchesSurrogateDifferences) {
  const std::size_t p = 10;
  const CounterRng rng(10, 0);
  Vec g(p), mu(p), s2(p);
  for (std::size_t i = 0; i < p; ++i) {
    g[i] = rng.normal(i);
    mu[i] = rng.normal(50 + i);
    s2[i] = 0.01 + 0.1 * rng.uniform(100 + i);
  }
  const KlPenalty kl{0.5, 20.0};
  const auto r = vsam_sigma2_gradient(g, s2, kl);
  ASSERT_FALSE(r.degenerate);
  for (std::size_t i = 0; i < p; ++i) {
    const double h = 1e-4 * s2[i];
    Vec up = s2, dn = s2;
    up[i] += h;
    dn[i] -= h;
    const double fd = (vsam_surrogate_loss(0.3, g, mu, up, kl) - vsam_surrogate_loss(0.3, g, mu, dn, kl)) / (2.0 * h);
    EXPECT_LT(std::abs(fd - r.d_sigma2[i]) / std::abs(r.d_sigma2[i]), 1e-6) << i;
  }
}

TEST(KlPenalty, SigmaGradientVanishesAtPrior) {
  const KlPenalty kl{0.3, 100.0};
  for (double x : kl_sigma2_gradient(Vec(5, 0.09), kl)) EXPECT_NEAR(x, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(kl.alpha(), 1.0 / (2.0 * 100.0 * 0.09));
}

TEST(Mfvi, VariancesStayPositive) {
  const auto f = quadratic_objective({1.0, 50.0}, {0.0, 0.0});
  OptimizerConfig c;
  c.perturbation = Perturbation::Gaussian;
  c.covariance = CovarianceSpec::diagonal({1e-4, 1e-4});
  c.learn_sigma = true;
  c.lr_sigma = 5.0;
  c.lr_mu = 0.01;
  c.penalty = KlPenalty{1.0, 10.0};
  auto s = init_state(c, ParamVector(Vec{1.0, 1.0}));
  for (int k = 0; k < 200; ++k) {
    step(s, f, {}, c);
    for (double v : s.sigma.as<Diagonal>().variances) {
      ASSERT_GT(v, 0.0);
      ASSERT_TRUE(std::isfinite(v));
    }
  }
}

TEST(Schedule, PiecewiseConstant) {
  const StepSchedule s{{{60, 0.2}, {120, 0.04}}};
  EXPECT_EQ(apply_schedule(s, 0), 1.0);
  EXPECT_EQ(apply_schedule(s, 59), 1.0);
  EXPECT_EQ(apply_schedule(s, 60), 0.2);
  EXPECT_EQ(apply_schedule(s, 119), 0.2);
  EXPECT_EQ(apply_schedule(s, 120), 0.04);
  EXPECT_EQ(apply_schedule(s, 10'000), 0.04);
  EXPECT_EQ(apply_schedule({}, 5), 1.0);
  OptimizerConfig c;
  c.schedule = StepSchedule{{{60, 0.2}, {60, 0.04}}};
  EXPECT_THROW(validate(c), Error);
}

TEST(Config, Validation) {
  OptimizerConfig c;
  c.momentum = 1.0;
  EXPECT_THROW(validate(c), Error);
  c.momentum = 0.0;
  c.learn_sigma = true;
  EXPECT_THROW(validate(c), Error);
  c.covariance = CovarianceSpec::diagonal({1.0});
  c.lr_sigma = 0.1;
  EXPECT_NO_THROW(validate(c));
  c.penalty = KlPenalty{0.0, 1.0};
  EXPECT_THROW(validate(c), Error);
}

// Small rho: every perturbed optimizer should shadow SGD on the same penalty.
class Collapse : public ::testing::TestWithParam<double> {};

TEST_P(Collapse, PerturbedTrajectoriesTrackSgd) {
  const double rho = GetParam();
  const auto f = quadratic_objective({1.0, 3.0}, {0.2, -0.1});
  const ParamVector mu0(Vec{1.0, -1.0});
  const KlPenalty kl{1.0, 100.0};
  OptimizerConfig sgd;
  sgd.lr_mu = 0.05;
  sgd.momentum = 0.9;
  sgd.penalty = L2Penalty{kl.alpha()};
  const auto base = run_trajectory(f, sgd, mu0, 100);

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
  for (const auto* c : {&sam, &rsam, &vsam}) {
    const auto path = run_trajectory(f, *c, mu0, 100);
    for (std::size_t k = 0; k < path.size(); ++k)
      ASSERT_LE(vec::norm(vec::sub(path[k], base[k])), 10.0 * rho) << "step " << k;
  }
}

INSTANTIATE_TEST_SUITE_P(Rho, Collapse, ::testing::Values(1e-2, 1e-3, 1e-4));
