#include <gtest/gtest.h>

#include <cmath>

#include "flatopt/objective.hpp"
#include "flatopt/trajectory.hpp"

using namespace flatopt;

namespace {

const Vec kMu0{1.0, 1.0};

QuadraticObjective quad() { return quadratic_objective({1.0, 3.0}, {0.0, 0.0}); }

}  // namespace

TEST(Trajectory, SamSmallRhoFollowsModifiedFlow) {
  const auto f = quad();
  const Vec s(2, 1e-8 / 2.0);
  const auto d = backward_error_trajectory_check(TrajectoryKind::Sam, f, kMu0, s, 0.01, 100);
  EXPECT_LT(d.from_modified, 0.5 * d.from_original);
}

TEST(Trajectory, SamOrders) {
  const auto f = quad();
  const auto small = backward_error_order_study(TrajectoryKind::Sam, f, kMu0, Vec(2, 1e-8 / 2.0), 0.01, 100, 3);
  EXPECT_NEAR(small.modified_order, 2.0, 0.4);
  EXPECT_NEAR(small.original_order, 1.0, 0.2);
  const auto moderate =
      backward_error_order_study(TrajectoryKind::Sam, f, kMu0, Vec(2, 0.05 * 0.05 / 2.0), 0.01, 100, 3);
  EXPECT_NEAR(moderate.intermediate_order, 2.0, 0.4);
  for (const auto& d : moderate.deviations) EXPECT_LT(d.from_intermediate, d.from_original);
}

TEST(Trajectory, ExpectedMfviOrders) {
  const auto f = quad();
  const auto s = backward_error_order_study(TrajectoryKind::ExpectedMfvi, f, kMu0, Vec(2, 0.05 * 0.05 / 2.0), 0.01,
                                            100, 3);
  EXPECT_NEAR(s.modified_order, 2.0, 0.4);
  for (const auto& d : s.deviations) {
    EXPECT_LT(d.from_modified, 0.5 * d.from_original);
    EXPECT_EQ(d.from_modified, d.from_intermediate);
  }
}

TEST(Trajectory, MfviOnQuarticUsesHessianDerivative) {
  const QuarticObjective f(0.5, {1.0, 2.0}, {0.0, 0.0});
  const auto d = backward_error_trajectory_check(TrajectoryKind::ExpectedMfvi, f, Vec{0.8, -0.6},
                                                 Vec(2, 0.05 * 0.05 / 2.0), 0.01, 100);
  EXPECT_LT(d.from_modified, 0.5 * d.from_original);
}

TEST(Trajectory, Errors) {
  const LinearObjective big(Vec(11, 1.0));
  EXPECT_THROW(backward_error_trajectory_check(TrajectoryKind::Sam, big, Vec(11, 0.0), Vec(11, 1.0), 0.1, 2), Error);
  const auto f = quad();
  EXPECT_THROW(backward_error_trajectory_check(TrajectoryKind::Sam, f, Vec{1.0}, Vec{1.0, 1.0}, 0.1, 2), Error);
}
