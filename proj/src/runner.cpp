#include "bisense/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

namespace bisense {

SweepOutput sweep_power(const Simulator& sim, const SweepRequest& request) {
  if (request.tx_power_dbm.empty()) throw std::invalid_argument("sweep_power: empty power list");
  if (request.modes.empty()) throw std::invalid_argument("sweep_power: empty mode list");
  if (request.runs < 1) throw std::invalid_argument("sweep_power: runs must be positive");

  struct Task {
    double pt_dbm;
    Mode mode;
    int run_id;
  };
  std::vector<Task> tasks;
  for (double pt : request.tx_power_dbm)
    for (const auto& name : request.modes)
      for (int r = 0; r < request.runs; ++r) tasks.push_back({pt, Mode::parse(name), r});

  std::vector<RunResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        results[i] = sim.run(tasks[i].mode, tasks[i].pt_dbm, tasks[i].run_id);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
      }
    }
  };

  int workers = request.workers > 0 ? request.workers : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, static_cast<int>(tasks.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  SweepOutput out;
  Aggregator agg(config_hash(sim.config()));
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    out.runs.push_back({tasks[i].pt_dbm, tasks[i].mode.name(), tasks[i].run_id, results[i].death_epoch});
    for (auto& rec : results[i].records) {
      agg.add(rec);
      out.records.push_back(std::move(rec));
    }
  }
  out.summary = agg.summaries();
  return out;
}

void write_sweep_outputs(const std::filesystem::path& out_dir, const ScenarioConfig& cfg, const SweepRequest& request,
                         const SweepOutput& output, bool emit_epochs) {
  std::filesystem::create_directories(out_dir);
  const int n_rx = static_cast<int>(cfg.geometry.n_receivers());
  if (emit_epochs) write_epoch_csv(out_dir / "epochs.csv", output.records, n_rx);
  write_summary_csv(out_dir / "summary.csv", output.summary);

  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));

  nlohmann::json manifest;
  manifest["config_hash"] = hash;
  manifest["master_seed"] = cfg.master_seed;
  manifest["seed_scheme"] = "seed_seq{seed_lo, seed_hi, run_id, mode_code, round(pt_dbm*1000)}";
  manifest["modes"] = request.modes;
  manifest["tx_power_dbm"] = request.tx_power_dbm;
  manifest["runs"] = request.runs;
  manifest["output_dir"] = out_dir.string();
  manifest["timestamp_utc"] = stamp;
  manifest["config"] = nlohmann::json::parse(canonical_config_json(cfg));
  nlohmann::json deaths = nlohmann::json::array();
  for (const auto& r : output.runs)
    deaths.push_back({{"pt_dbm", r.pt_dbm}, {"mode", r.mode}, {"run_id", r.run_id}, {"death_epoch", r.death_epoch}});
  manifest["runs_detail"] = deaths;
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest.json");
  out << manifest.dump(2) << '\n';
}

}  // namespace bisense
