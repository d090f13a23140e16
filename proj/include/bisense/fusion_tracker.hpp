#pragma once

#include "bisense/rx_estimator.hpp"
#include "bisense/scenario.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace bisense {

/// Valid iff the estimate is valid and within beta of the prediction.
bool gate_validate(const PositionEstimate& estimate, const Vec2& predicted, double gate_radius_m);

/// The min(n_select, |valid|) estimates with smallest GDOP, ties to the lower
/// receiver index. Result is ordered by GDOP.
std::vector<PositionEstimate> select_receivers(const std::vector<PositionEstimate>& valid, int n_select);

struct FusedEstimate {
  Vec2 position{0.0, 0.0};
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  std::vector<int> receivers;
};

/// alpha = (sum Sigma_i^-1)^-1 sum Sigma_i^-1 T_i, Sigma_fused = (sum Sigma_i^-1)^-1.
/// A single estimate is passed through unchanged.
FusedEstimate ml_fuse(const std::vector<PositionEstimate>& estimates);

/// 3 T^l - 3 T^{l-1} + T^{l-2}.
Vec2 predict_next(const Vec2& t_l, const Vec2& t_l1, const Vec2& t_l2);

/// Transmit angle toward `position`, relative to the TX broadside.
double predicted_aod(const Vec2& position, const Vec2& tx, double tx_broadside_rad);

struct TrackState {
  std::array<Vec2, 3> history;  // T^l, T^{l-1}, T^{l-2}
  int n_fixes = 1;              // distinct positions in history
  Vec2 predicted{0.0, 0.0};     // T_pred for the next epoch
  double predicted_aod_rad = 0.0;
  int miss_count = 0;
  bool alive = true;
  int epoch = 0;                // last epoch processed
};

struct StepResult {
  bool coasted = false;
  Vec2 position{0.0, 0.0};      // T^l
  FusedEstimate fused;
  std::vector<bool> gated;      // per input, passed the gate
  std::vector<int> selected;    // receiver indices used in fusion
};

/// Per-target beam tracker. The acquired position seeds all three history
/// slots, so epoch 1 points at it; with two fixes the prediction is 2 T^l - T^{l-1},
/// afterwards the 3-point constant-acceleration predictor. Tracking stops after 3 consecutive
/// all-invalid epochs.
class Tracker {
 public:
  Tracker(const Vec2& initial_position, const Vec2& tx, double tx_broadside_rad, double gate_radius_m, int n_select);

  const TrackState& state() const { return state_; }

  /// Gates, selects, fuses (or coasts) and predicts the next epoch.
  /// Throws std::logic_error on a dead track.
  StepResult step(const std::vector<PositionEstimate>& estimates);

  static constexpr int kMaxMisses = 3;

 private:
  void update_prediction();

  TrackState state_;
  Vec2 tx_;
  double tx_broadside_rad_;
  double gate_radius_m_;
  int n_select_;
};

}  // namespace bisense
