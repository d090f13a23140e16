#pragma once

#include "bisense/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace bisense {

/// log2(1 + (lambda / (4 pi d1))^2 P_T |a(theta)^H f(theta_hat)|^2 / (K N0 M df)).
double spectral_efficiency(double theta_true_rad, double theta_hat_rad, double d1_m, const SystemParams& params);

/// Shortest signed theta - theta_hat, in degrees.
double predicted_aod_error_deg(double theta_true_rad, double theta_hat_rad);

struct ReceiverRecord {
  double x = 0.0;
  double y = 0.0;
  bool valid = false;
  double gdop_est = 0.0;
  double gdop_act = 0.0;
  bool selected = false;
};

struct EpochRecord {
  int run_id = 0;
  int epoch = 0;
  double pt_dbm = 0.0;
  std::string mode;
  double x_true = 0.0;
  double y_true = 0.0;
  double theta_true_deg = 0.0;
  double x_fused = 0.0;
  double y_fused = 0.0;
  double theta_pred_deg = 0.0;
  double se_bps_hz = 0.0;
  double pae_deg = 0.0;
  std::vector<ReceiverRecord> rx;
};

/// Field-level equality; NaN equals NaN.
bool same_record(const EpochRecord& a, const EpochRecord& b);

std::string epoch_csv_header(int n_receivers);
void write_epoch_csv(std::ostream& out, const std::vector<EpochRecord>& records, int n_receivers);
void write_epoch_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& records, int n_receivers);
std::vector<EpochRecord> read_epoch_csv(std::istream& in);
std::vector<EpochRecord> read_epoch_csv(const std::filesystem::path& path);

struct SweepSummary {
  double pt_dbm = 0.0;
  std::string mode;
  double avg_se = 0.0;
  int n_runs = 0;
};

void write_summary_csv(const std::filesystem::path& path, const std::vector<SweepSummary>& rows);
std::vector<SweepSummary> read_summary_csv(const std::filesystem::path& path);

struct BoxStats {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  int n = 0;
  int n_outliers = 0;
};

/// Tukey box plot: linear-interpolated quartiles, whiskers at the most
/// extreme samples within 1.5 IQR of the box.
BoxStats box_stats(std::vector<double> values);

/// Mergeable accumulator of epoch records that share one config hash.
/// Sums are formed in (run, epoch) order on query, so any merge order yields
/// identical results.
class Aggregator {
 public:
  explicit Aggregator(std::uint64_t config_hash) : config_hash_(config_hash) {}

  std::uint64_t config_hash() const { return config_hash_; }
  void add(const EpochRecord& record);
  /// Throws std::invalid_argument if the hashes differ.
  void merge(const Aggregator& other);

  /// One row per (P_T, mode), ordered by P_T then mode.
  std::vector<SweepSummary> summaries() const;
  /// Mean SE over runs, indexed by epoch.
  std::vector<double> mean_se_per_epoch(double pt_dbm, const std::string& mode) const;
  BoxStats pae_stats(double pt_dbm, const std::string& mode) const;

 private:
  struct Key {
    double pt_dbm;
    std::string mode;
    bool operator<(const Key& o) const { return pt_dbm != o.pt_dbm ? pt_dbm < o.pt_dbm : mode < o.mode; }
  };
  struct Cell {
    std::map<std::pair<int, int>, double> se;   // (run, epoch) -> SE
    std::map<std::pair<int, int>, double> pae;  // finite PAE only
  };
  std::uint64_t config_hash_;
  std::map<Key, Cell> cells_;
};

}  // namespace bisense
