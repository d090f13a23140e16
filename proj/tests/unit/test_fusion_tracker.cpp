#include "bisense/fusion_tracker.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace bisense;

namespace {

PositionEstimate make_est(int rx, Vec2 pos, Eigen::Matrix2d cov, double gdop = 1.0, bool valid = true) {
  PositionEstimate e;
  e.receiver_index = rx;
  e.position = pos;
  e.covariance = cov;
  e.gdop = gdop;
  e.valid = valid;
  return e;
}

Eigen::Matrix2d diag(double a, double b) { return Eigen::Vector2d(a, b).asDiagonal(); }

}  // namespace

TEST(Gate, Boundaries) {
  const Vec2 pred(1.0, 2.0);
  EXPECT_TRUE(gate_validate(make_est(0, pred, diag(1, 1)), pred, 6.0));
  EXPECT_TRUE(gate_validate(make_est(0, pred + Vec2(6.0, 0.0), diag(1, 1)), pred, 6.0));
  EXPECT_FALSE(gate_validate(make_est(0, pred + Vec2(0.0, 6.01), diag(1, 1)), pred, 6.0));
  EXPECT_FALSE(gate_validate(make_est(0, pred, diag(1, 1), 1.0, false), pred, 6.0));
  EXPECT_THROW(gate_validate(make_est(0, pred, diag(1, 1)), pred, 0.0), std::invalid_argument);
}

TEST(Select, OrderingAndTies) {
  const std::vector<PositionEstimate> v{make_est(0, {0, 0}, diag(1, 1), 0.4), make_est(1, {0, 0}, diag(1, 1), 0.9),
                                        make_est(2, {0, 0}, diag(1, 1), 7.0)};
  auto s = select_receivers(v, 2);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].receiver_index, 0);
  EXPECT_EQ(s[1].receiver_index, 1);
  EXPECT_EQ(select_receivers({v[2]}, 2).size(), 1u);
  EXPECT_TRUE(select_receivers({}, 2).empty());
  const std::vector<PositionEstimate> tie{make_est(2, {0, 0}, diag(1, 1), 1.0), make_est(1, {0, 0}, diag(1, 1), 1.0)};
  EXPECT_EQ(select_receivers(tie, 1)[0].receiver_index, 1);
}

TEST(Fuse, Examples) {
  auto a = ml_fuse({make_est(0, {0, 0}, diag(1, 1)), make_est(1, {2, 2}, diag(1, 1))});
  EXPECT_NEAR((a.position - Vec2(1, 1)).norm(), 0.0, 1e-12);
  auto b = ml_fuse({make_est(0, {0, 0}, diag(1, 4)), make_est(1, {1, 1}, diag(4, 1))});
  EXPECT_NEAR((b.position - Vec2(0.2, 0.8)).norm(), 0.0, 1e-12);
  const Eigen::Matrix2d s = diag(3.0, 5.0);
  auto c = ml_fuse({make_est(2, {4, -1}, s)});
  EXPECT_EQ(c.position, Vec2(4, -1));
  EXPECT_EQ(c.covariance, s);
  EXPECT_EQ(c.receivers, std::vector<int>{2});
  EXPECT_THROW(ml_fuse({}), std::invalid_argument);
  EXPECT_THROW(ml_fuse({make_est(0, {0, 0}, diag(1, -1)), make_est(1, {0, 0}, diag(1, 1))}), std::invalid_argument);
}

TEST(Fuse, PermutationAndScaleInvariance) {
  Rng rng(1);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    std::vector<PositionEstimate> v;
    for (int i = 0; i < 4; ++i) {
      Eigen::Matrix2d A;
      A << g(rng), g(rng), g(rng), g(rng);
      v.push_back(make_est(i, {g(rng), g(rng)}, A * A.transpose() + 0.1 * Eigen::Matrix2d::Identity()));
    }
    const Vec2 ref = ml_fuse(v).position;
    std::reverse(v.begin(), v.end());
    std::swap(v[0], v[2]);
    EXPECT_NEAR((ml_fuse(v).position - ref).norm(), 0.0, 1e-10);
    for (auto& e : v) e.covariance *= 37.0;
    EXPECT_NEAR((ml_fuse(v).position - ref).norm(), 0.0, 1e-10);
  }
}

TEST(Predict, Examples) {
  EXPECT_EQ(predict_next({3, 3}, {2, 2}, {1, 1}), Vec2(4, 4));
  EXPECT_NEAR(rad2deg(predicted_aod({4, 4}, {0, 0}, 0.0)), 45.0, 1e-12);
  EXPECT_EQ(predict_next({5, 6}, {5, 6}, {5, 6}), Vec2(5, 6));
  EXPECT_EQ(predict_next({0, 4}, {1, 1}, {2, 0}), Vec2(-1, 9));
  // Quadrant-aware relative to a shifted TX.
  EXPECT_NEAR(rad2deg(predicted_aod({9, 11}, {10, 10}, 0.0)), 180.0 - 135.0, 1e-12);
}

TEST(Tracker, Bootstrap) {
  Tracker t({27.5, 25.0}, {0, 0}, 0.0, 6.0, 2);
  EXPECT_EQ(t.state().predicted, Vec2(27.5, 25.0));
  t.step({make_est(0, {27.5, 24.0}, diag(1, 1))});
  EXPECT_NEAR((t.state().predicted - Vec2(27.5, 23.0)).norm(), 0.0, 1e-12);
  t.step({make_est(0, {27.5, 23.0}, diag(1, 1))});
  EXPECT_NEAR((t.state().predicted - Vec2(27.5, 22.0)).norm(), 0.0, 1e-12);
  EXPECT_EQ(t.state().n_fixes, 3);
  EXPECT_NEAR(t.state().predicted_aod_rad, std::atan2(22.0, 27.5), 1e-12);
}

TEST(Tracker, CoastAndDeath) {
  Tracker t({0.0, 10.0}, {0, 0}, 0.0, 6.0, 2);
  const Vec2 pred = t.state().predicted;
  const PositionEstimate far = make_est(0, {50, 50}, diag(1, 1));
  StepResult r = t.step({far});
  EXPECT_TRUE(r.coasted);
  EXPECT_EQ(r.position, pred);
  EXPECT_EQ(t.state().miss_count, 1);
  EXPECT_TRUE(t.state().alive);
  t.step({far});
  EXPECT_TRUE(t.state().alive);
  t.step({far});
  EXPECT_FALSE(t.state().alive);
  EXPECT_THROW(t.step({far}), std::logic_error);
}

TEST(Tracker, SingleValidResetsMisses) {
  Tracker t({0.0, 10.0}, {0, 0}, 0.0, 6.0, 2);
  t.step({make_est(0, {50, 50}, diag(1, 1))});
  ASSERT_EQ(t.state().miss_count, 1);
  const StepResult r = t.step({make_est(0, {90, 90}, diag(1, 1)), make_est(1, {0.5, 10.0}, diag(2, 3), 2.0),
                               make_est(2, {0, 0}, diag(1, 1), 1.0, false)});
  EXPECT_EQ(t.state().miss_count, 0);
  EXPECT_FALSE(r.coasted);
  EXPECT_EQ(r.position, Vec2(0.5, 10.0));
  EXPECT_EQ(r.selected, std::vector<int>{1});
  EXPECT_EQ(r.gated, (std::vector<bool>{false, true, false}));
}

TEST(Tracker, FusedStaysInsideGate) {
  Rng rng(2);
  std::normal_distribution<double> g(0.0, 3.0);
  Tracker t({0.0, 20.0}, {0, 0}, 0.0, 6.0, 2);
  for (int k = 0; k < 200 && t.state().alive; ++k) {
    const Vec2 pred = t.state().predicted;
    std::vector<PositionEstimate> v;
    for (int i = 0; i < 3; ++i)
      v.push_back(make_est(i, pred + Vec2(g(rng), g(rng)), diag(1.0 + i, 2.0), 1.0 + i));
    const StepResult r = t.step(v);
    if (!r.coasted) {
      EXPECT_LE((r.position - pred).norm(), 6.0 + 1e-9);
      double min_trace = 1e300;
      for (int i : r.selected) min_trace = std::min(min_trace, v[i].covariance.trace());
      EXPECT_LE(r.fused.covariance.trace(), min_trace + 1e-12);
    }
  }
}
