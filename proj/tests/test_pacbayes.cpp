#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "flatopt/pacbayes.hpp"
#include "flatopt/rng.hpp"

using namespace flatopt;

namespace {

// Midpoint-rule KL over +-12 posterior standard deviations.
double kl_oracle(double m, double s2, double s02) {
  const double s = std::sqrt(s2);
  const int n = 200'000;
  const double lo = -12.0, h = 24.0 / n;
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double t = lo + (k + 0.5) * h;
    const double x = m + s * t;
    const double q = std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
    sum += q * (-0.5 * std::log(s2 / s02) - 0.5 * t * t + 0.5 * x * x / s02) * h;
  }
  return sum;
}

}  // namespace

TEST(GaussianKl, MatchesScalarIntegral) {
  const CounterRng rng(12, 0);
  for (int k = 0; k < 100; ++k) {
    const double m = rng.normal(3 * k);
    const double s2 = std::exp(rng.normal(3 * k + 1));
    const double s02 = std::exp(rng.normal(3 * k + 2));
    EXPECT_NEAR(gaussian_kl(Vec{m}, Vec{s2}, s02), kl_oracle(m, s2, s02), 1e-8);
  }
}

TEST(GaussianKl, Examples) {
  EXPECT_NEAR(gaussian_kl(Vec{0.0, 0.0}, Vec{2.0, 2.0}, 1.0), 1.0 - std::log(2.0), 1e-10);
  EXPECT_NEAR(gaussian_kl(Vec{1.0}, Vec{1.0}, 1.0), 0.5, 1e-15);
  EXPECT_EQ(gaussian_kl(Vec{0.0, 0.0}, Vec{0.3, 0.3}, 0.3), 0.0);
  EXPECT_THROW(gaussian_kl(Vec{0.0}, Vec{1.0}, 0.0), Error);
  EXPECT_THROW(gaussian_kl(Vec{0.0}, Vec{1.0, 1.0}, 1.0), Error);
}

TEST(GaussianKl, NonNegative) {
  const CounterRng rng(13, 0);
  for (int k = 0; k < 500; ++k) {
    Vec mu(4), s(4);
    for (int i = 0; i < 4; ++i) {
      mu[i] = 0.1 * rng.normal(8 * k + i);
      s[i] = std::exp(0.1 * rng.normal(8 * k + 4 + i));
    }
    EXPECT_GE(gaussian_kl(mu, s, 1.0), 0.0);
  }
}

TEST(Gamma, Values) {
  EXPECT_NEAR(gamma_radius(2, 100), 3.5601, 1e-3);
  EXPECT_NEAR(gamma_radius(2, 100, GammaForm::Appendix), 2.0 * (1.0 + std::sqrt(std::log(100.0) / 2.0)), 1e-12);
  EXPECT_THROW(gamma_radius(0, 10), Error);
}

TEST(PacBound, Examples) {
  BoundInputs in{0, 101, 0.5, 0.0, 0.0, 0.0};
  EXPECT_NEAR(pac_bound(in), std::sqrt(std::log(202.0) / 200.0), 1e-12);
  BoundInputs typical{2, 100, 0.05, 0.1, 0.0, 0.0};
  EXPECT_NEAR(pac_bound(typical), 0.1 + std::sqrt((std::log(2000.0) + 2.0) / 198.0), 1e-12);
  EXPECT_NEAR(pac_bound(typical, 0.0), 0.1 + std::sqrt(std::log(2000.0) / 198.0), 1e-12);
  BoundInputs big{10, 1'000'000'000, 0.05, 0.3, 5.0, 1.0};
  EXPECT_NEAR(pac_bound(big), 0.3, 1e-3);
}

TEST(PacBound, InvalidInputs) {
  for (double d : {0.0, 1.0, -0.1, std::numeric_limits<double>::quiet_NaN()}) {
    BoundInputs in{2, 100, d, 0.0, 0.0, 1.0};
    try {
      pac_bound(in);
      FAIL() << d;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidDelta);
    }
  }
  BoundInputs small{2, 1, 0.05, 0.0, 0.0, 1.0};
  EXPECT_THROW(pac_bound(small), Error);
}

TEST(PacBound, Monotone) {
  const CounterRng rng(14, 0);
  for (int k = 0; k < 1000; ++k) {
    BoundInputs in{1 + rng.below(5 * k, 100), 2 + rng.below(5 * k + 1, 100'000), 0.001 + 0.9 * rng.uniform(5 * k + 2),
                   rng.uniform(5 * k + 3), 10.0 * rng.uniform(5 * k + 4), 1.0};
    const double b = pac_bound(in);
    auto more_n = in;
    more_n.n *= 2;
    EXPECT_LT(pac_bound(more_n), b);
    auto more_kl = in;
    more_kl.kl_value += 1.0;
    EXPECT_GT(pac_bound(more_kl), b);
    auto less_delta = in;
    less_delta.delta *= 0.5;
    EXPECT_GT(pac_bound(less_delta), b);
  }
}
