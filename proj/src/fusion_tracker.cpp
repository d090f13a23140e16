#include "bisense/fusion_tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bisense {

bool gate_validate(const PositionEstimate& estimate, const Vec2& predicted, double gate_radius_m) {
  if (!(gate_radius_m > 0.0)) throw std::invalid_argument("gate_validate: gate radius must be positive");
  if (!estimate.valid) return false;
  return (estimate.position - predicted).norm() <= gate_radius_m;
}

std::vector<PositionEstimate> select_receivers(const std::vector<PositionEstimate>& valid, int n_select) {
  std::vector<PositionEstimate> sorted = valid;
  std::stable_sort(sorted.begin(), sorted.end(), [](const PositionEstimate& a, const PositionEstimate& b) {
    if (a.gdop != b.gdop) return a.gdop < b.gdop;
    return a.receiver_index < b.receiver_index;
  });
  const std::size_t keep = std::min<std::size_t>(sorted.size(), static_cast<std::size_t>(std::max(n_select, 0)));
  sorted.resize(keep);
  return sorted;
}

FusedEstimate ml_fuse(const std::vector<PositionEstimate>& estimates) {
  FusedEstimate out;
  if (estimates.empty()) throw std::invalid_argument("ml_fuse: no estimates");
  for (const auto& e : estimates) out.receivers.push_back(e.receiver_index);
  if (estimates.size() == 1) {
    out.position = estimates[0].position;
    out.covariance = estimates[0].covariance;
    return out;
  }
  Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
  Eigen::Vector2d weighted = Eigen::Vector2d::Zero();
  for (const auto& e : estimates) {
    Eigen::LLT<Eigen::Matrix2d> llt(e.covariance);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("ml_fuse: covariance not positive definite");
    const Eigen::Matrix2d inv = llt.solve(Eigen::Matrix2d::Identity());
    info += inv;
    weighted += inv * e.position;
  }
  info = 0.5 * (info + info.transpose());
  const Eigen::LLT<Eigen::Matrix2d> fused(info);
  out.position = fused.solve(weighted);
  out.covariance = fused.solve(Eigen::Matrix2d::Identity());
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

Vec2 predict_next(const Vec2& t_l, const Vec2& t_l1, const Vec2& t_l2) { return 3.0 * t_l - 3.0 * t_l1 + t_l2; }

double predicted_aod(const Vec2& position, const Vec2& tx, double tx_broadside_rad) {
  const Vec2 d = position - tx;
  return ula_local_angle(std::atan2(d.y(), d.x()), tx_broadside_rad);
}

Tracker::Tracker(const Vec2& initial_position, const Vec2& tx, double tx_broadside_rad, double gate_radius_m,
                 int n_select)
    : tx_(tx), tx_broadside_rad_(tx_broadside_rad), gate_radius_m_(gate_radius_m), n_select_(n_select) {
  if (!(gate_radius_m > 0.0)) throw std::invalid_argument("Tracker: gate radius must be positive");
  if (n_select < 1) throw std::invalid_argument("Tracker: n_select must be >= 1");
  state_.history = {initial_position, initial_position, initial_position};
  state_.n_fixes = 1;
  state_.epoch = 0;
  update_prediction();
}

void Tracker::update_prediction() {
  const auto& h = state_.history;
  if (state_.n_fixes >= 3) {
    state_.predicted = predict_next(h[0], h[1], h[2]);
  } else if (state_.n_fixes == 2) {
    state_.predicted = 2.0 * h[0] - h[1];
  } else {
    state_.predicted = h[0];
  }
  state_.predicted_aod_rad = predicted_aod(state_.predicted, tx_, tx_broadside_rad_);
}

StepResult Tracker::step(const std::vector<PositionEstimate>& estimates) {
  if (!state_.alive) throw std::logic_error("Tracker::step on a dead track");
  StepResult result;
  std::vector<PositionEstimate> passed;
  for (const auto& e : estimates) {
    const bool ok = gate_validate(e, state_.predicted, gate_radius_m_);
    result.gated.push_back(ok);
    if (ok) passed.push_back(e);
  }

  if (passed.empty()) {
    result.coasted = true;
    result.position = state_.predicted;
    ++state_.miss_count;
    if (state_.miss_count >= kMaxMisses) state_.alive = false;
  } else {
    state_.miss_count = 0;
    const auto chosen = select_receivers(passed, n_select_);
    result.fused = ml_fuse(chosen);
    result.selected = result.fused.receivers;
    result.position = result.fused.position;
  }

  state_.history = {result.position, state_.history[0], state_.history[1]};
  state_.n_fixes = std::min(state_.n_fixes + 1, 3);
  ++state_.epoch;
  update_prediction();
  return result;
}

}  // namespace bisense
