#pragma once

#include "bisense/metrics_io.hpp"
#include "bisense/simulation.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace bisense {

struct SweepRequest {
  std::vector<double> tx_power_dbm;
  std::vector<std::string> modes;
  int runs = 1;
  /// 0 selects std::thread::hardware_concurrency().
  int workers = 0;
};

struct RunInfo {
  double pt_dbm = 0.0;
  std::string mode;
  int run_id = 0;
  int death_epoch = -1;
};

struct SweepOutput {
  std::vector<EpochRecord> records;  // ordered by P_T, mode, run, epoch
  std::vector<RunInfo> runs;
  std::vector<SweepSummary> summary;
};

/// Runs every (P_T, mode, run) triple. Results do not depend on `workers`.
SweepOutput sweep_power(const Simulator& sim, const SweepRequest& request);

/// Writes epochs.csv (optional), summary.csv and manifest.json into out_dir.
void write_sweep_outputs(const std::filesystem::path& out_dir, const ScenarioConfig& cfg, const SweepRequest& request,
                         const SweepOutput& output, bool emit_epochs);

}  // namespace bisense
