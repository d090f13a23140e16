#include "bisense/runner.hpp"
#include "bisense/scenario.hpp"
#include "bisense/simulation.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

struct Options {
  std::string config_path;
  std::string mode = "all";
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::vector<double> powers;
  std::string out_dir = "out";
  int workers = 0;
  std::string arch;
  std::string emit_epochs = "yes";
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "Scenario JSON (defaults to the built-in reference scenario)");
  cmd->add_option("--mode", o.mode, "rx<i>, fuse, oracle or all")->default_val("all");
  cmd->add_option("--runs", o.runs, "Monte Carlo runs per (power, mode)")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--power-dbm", o.powers, "Transmit powers in dBm, comma separated")->delimiter(',');
  cmd->add_option("--out", o.out_dir, "Output directory")->default_val("out");
  cmd->add_option("--workers", o.workers, "Worker threads (0 = all cores, 1 = serial)")->default_val(0);
  cmd->add_option("--arch", o.arch, "Receiver architecture")->check(CLI::IsMember({"digital", "hda"}));
  cmd->add_option("--emit-epochs", o.emit_epochs, "Write the per-epoch CSV")
      ->check(CLI::IsMember({"yes", "no"}))
      ->default_val("yes");
}

int execute(const Options& o, bool single_power) {
  bisense::ScenarioConfig cfg =
      o.config_path.empty() ? bisense::ScenarioConfig::reference() : bisense::load_config(o.config_path);
  if (o.seed) cfg.master_seed = *o.seed;
  if (!o.arch.empty())
    cfg.receiver.architecture = o.arch == "hda" ? bisense::Architecture::hda : bisense::Architecture::digital;

  bisense::SweepRequest req;
  req.tx_power_dbm = o.powers.empty() ? cfg.sweep.tx_power_dbm : o.powers;
  if (single_power && req.tx_power_dbm.size() != 1) {
    std::cerr << "run: exactly one --power-dbm value expected (use sweep for lists)\n";
    return 2;
  }
  if (o.mode == "all") {
    req.modes = cfg.sweep.modes;
  } else {
    req.modes = {o.mode};
  }
  for (const auto& m : req.modes) bisense::Mode::parse(m);
  req.runs = o.runs.value_or(cfg.sweep.runs);
  req.workers = o.workers;

  const bisense::Simulator sim(cfg);
  const auto output = bisense::sweep_power(sim, req);
  bisense::write_sweep_outputs(o.out_dir, cfg, req, output, o.emit_epochs == "yes");
  for (const auto& row : output.summary)
    std::printf("pt_dbm=%g mode=%s avg_se=%.4f n_runs=%d\n", row.pt_dbm, row.mode.c_str(), row.avg_se, row.n_runs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bistatic sensing-assisted beam tracking simulator"};
  app.require_subcommand(1);
  Options run_opts;
  Options sweep_opts;
  CLI::App* run = app.add_subcommand("run", "Simulate one transmit power");
  CLI::App* sweep = app.add_subcommand("sweep", "Simulate a list of transmit powers");
  add_common(run, run_opts);
  add_common(sweep, sweep_opts);
  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return execute(run_opts, true);
    return execute(sweep_opts, false);
  } catch (const bisense::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
