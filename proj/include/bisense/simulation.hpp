#pragma once

#include "bisense/channel_sim.hpp"
#include "bisense/hda_frontend.hpp"
#include "bisense/metrics_io.hpp"
#include "bisense/rx_estimator.hpp"
#include "bisense/scenario.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace bisense {

/// Compared schemes: one receiver only ("rx<i>"), select-and-fuse ("fuse"),
/// or perfect pointing ("oracle").
struct Mode {
  enum class Kind { single, fuse, oracle };
  Kind kind = Kind::fuse;
  int receiver = -1;

  static Mode parse(const std::string& name);
  std::string name() const;
  /// Seed component: receiver index for single modes, 100 for fuse, 200 for oracle.
  std::uint32_t seed_code() const;
};

/// One receiver's processing of one epoch.
struct ReceiverOutcome {
  PositionEstimate estimate;
  double gdop_actual = 0.0;
  bool attempted = false;
};

struct RunResult {
  std::vector<EpochRecord> records;
  int death_epoch = -1;  // epoch whose miss ended the track, -1 if it survived
};

/// Per-run generator seeded from (master seed, run id, mode, P_T).
Rng make_run_rng(std::uint64_t master_seed, int run_id, const Mode& mode, double pt_dbm);

/// Holds the read-only state shared by every run of one configuration.
class Simulator {
 public:
  explicit Simulator(ScenarioConfig cfg);

  const ScenarioConfig& config() const { return cfg_; }
  const std::vector<WaypointState>& waypoints() const { return waypoints_; }
  const SteeringTable& steering_table() const { return *table_; }

  RunResult run(const Mode& mode, double pt_dbm, int run_id) const;

  /// Full per-receiver chain: echo synthesis, MUSIC, beamforming, delay
  /// estimation, bistatic solve, CRLB covariance and GDOP.
  ReceiverOutcome process_receiver(const SystemParams& params, int rx_index, const WaypointState& truth,
                                   double tx_beam_rad, const QpskGrid& qpsk, const Vec2& predicted_position,
                                   Rng& rng) const;

 private:
  ScenarioConfig cfg_;
  std::vector<WaypointState> waypoints_;
  std::shared_ptr<const SteeringTable> table_;
};

}  // namespace bisense
