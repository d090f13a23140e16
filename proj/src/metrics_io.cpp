#include "bisense/metrics_io.hpp"

#include "bisense/signal_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bisense {

double spectral_efficiency(double theta_true_rad, double theta_hat_rad, double d1_m, const SystemParams& params) {
  if (!(d1_m > 0.0)) throw std::invalid_argument("spectral_efficiency: d1 must be positive");
  const Beamformer f = make_beamformer(theta_hat_rad, params.n_tx_antennas, BeamKind::transmit);
  const double gain = beam_gain(theta_true_rad, f);
  const double path = params.wavelength_m() / (4.0 * kPi * d1_m);
  const double snr = path * path * params.tx_power_w * gain /
                     (params.n_users * params.noise_psd_w_per_hz * params.n_subcarriers * params.subcarrier_spacing_hz);
  return std::log2(1.0 + snr);
}

double predicted_aod_error_deg(double theta_true_rad, double theta_hat_rad) {
  return rad2deg(wrap_angle(theta_true_rad - theta_hat_rad));
}

namespace {

bool same_double(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("bad number in CSV: " + s);
  return v;
}

int parse_int(const std::string& s) {
  std::size_t used = 0;
  const int v = std::stoi(s, &used);
  if (used != s.size()) throw std::runtime_error("bad integer in CSV: " + s);
  return v;
}

}  // namespace

bool same_record(const EpochRecord& a, const EpochRecord& b) {
  if (a.run_id != b.run_id || a.epoch != b.epoch || a.mode != b.mode || a.rx.size() != b.rx.size()) return false;
  const double lhs[] = {a.pt_dbm, a.x_true, a.y_true, a.theta_true_deg, a.x_fused, a.y_fused,
                        a.theta_pred_deg, a.se_bps_hz, a.pae_deg};
  const double rhs[] = {b.pt_dbm, b.x_true, b.y_true, b.theta_true_deg, b.x_fused, b.y_fused,
                        b.theta_pred_deg, b.se_bps_hz, b.pae_deg};
  for (int i = 0; i < 9; ++i)
    if (!same_double(lhs[i], rhs[i])) return false;
  for (std::size_t i = 0; i < a.rx.size(); ++i) {
    const auto& p = a.rx[i];
    const auto& q = b.rx[i];
    if (!same_double(p.x, q.x) || !same_double(p.y, q.y) || p.valid != q.valid || !same_double(p.gdop_est, q.gdop_est) ||
        !same_double(p.gdop_act, q.gdop_act) || p.selected != q.selected)
      return false;
  }
  return true;
}

std::string epoch_csv_header(int n_receivers) {
  std::string h =
      "run_id,epoch,pt_dbm,mode,x_true,y_true,theta_true_deg,x_fused,y_fused,theta_pred_deg,se_bps_hz,pae_deg";
  for (int i = 0; i < n_receivers; ++i) {
    const std::string s = std::to_string(i);
    h += ",x" + s + ",y" + s + ",valid_" + s + ",gdop_est_" + s + ",gdop_act_" + s + ",selected_" + s;
  }
  return h;
}

void write_epoch_csv(std::ostream& out, const std::vector<EpochRecord>& records, int n_receivers) {
  out << epoch_csv_header(n_receivers) << '\n';
  for (const auto& r : records) {
    if (static_cast<int>(r.rx.size()) != n_receivers) throw std::invalid_argument("write_epoch_csv: receiver count mismatch");
    out << r.run_id << ',' << r.epoch << ',' << fmt(r.pt_dbm) << ',' << r.mode << ',' << fmt(r.x_true) << ','
        << fmt(r.y_true) << ',' << fmt(r.theta_true_deg) << ',' << fmt(r.x_fused) << ',' << fmt(r.y_fused) << ','
        << fmt(r.theta_pred_deg) << ',' << fmt(r.se_bps_hz) << ',' << fmt(r.pae_deg);
    for (const auto& x : r.rx) {
      out << ',' << fmt(x.x) << ',' << fmt(x.y) << ',' << (x.valid ? 1 : 0) << ',' << fmt(x.gdop_est) << ','
          << fmt(x.gdop_act) << ',' << (x.selected ? 1 : 0);
    }
    out << '\n';
  }
}

void write_epoch_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& records, int n_receivers) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_epoch_csv(out, records, n_receivers);
}

std::vector<EpochRecord> read_epoch_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_epoch_csv: missing header");
  const auto header = split(line);
  const std::size_t base = 12;
  if (header.size() < base || (header.size() - base) % 6 != 0)
    throw std::runtime_error("read_epoch_csv: unexpected header");
  const int n_rx = static_cast<int>((header.size() - base) / 6);
  if (line != epoch_csv_header(n_rx) && line != epoch_csv_header(n_rx) + "\r")
    throw std::runtime_error("read_epoch_csv: unexpected header");

  std::vector<EpochRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size()) throw std::runtime_error("read_epoch_csv: wrong field count");
    EpochRecord r;
    r.run_id = parse_int(f[0]);
    r.epoch = parse_int(f[1]);
    r.pt_dbm = parse_double(f[2]);
    r.mode = f[3];
    r.x_true = parse_double(f[4]);
    r.y_true = parse_double(f[5]);
    r.theta_true_deg = parse_double(f[6]);
    r.x_fused = parse_double(f[7]);
    r.y_fused = parse_double(f[8]);
    r.theta_pred_deg = parse_double(f[9]);
    r.se_bps_hz = parse_double(f[10]);
    r.pae_deg = parse_double(f[11]);
    for (int i = 0; i < n_rx; ++i) {
      const std::size_t o = base + 6 * static_cast<std::size_t>(i);
      ReceiverRecord x;
      x.x = parse_double(f[o]);
      x.y = parse_double(f[o + 1]);
      x.valid = parse_int(f[o + 2]) != 0;
      x.gdop_est = parse_double(f[o + 3]);
      x.gdop_act = parse_double(f[o + 4]);
      x.selected = parse_int(f[o + 5]) != 0;
      r.rx.push_back(x);
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<EpochRecord> read_epoch_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_epoch_csv(in);
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SweepSummary>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "pt_dbm,mode,avg_se,n_runs\n";
  for (const auto& r : rows) out << fmt(r.pt_dbm) << ',' << r.mode << ',' << fmt(r.avg_se) << ',' << r.n_runs << '\n';
}

std::vector<SweepSummary> read_summary_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (split(line) != std::vector<std::string>{"pt_dbm", "mode", "avg_se", "n_runs"})
    throw std::runtime_error("read_summary_csv: unexpected header");
  std::vector<SweepSummary> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 4) throw std::runtime_error("read_summary_csv: wrong field count");
    rows.push_back({parse_double(f[0]), f[1], parse_double(f[2]), parse_int(f[3])});
  }
  return rows;
}

namespace {

double quantile_sorted(const std::vector<double>& v, double p) {
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

BoxStats box_stats(std::vector<double> values) {
  BoxStats s;
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }), values.end());
  s.n = static_cast<int>(values.size());
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.q1 = quantile_sorted(values, 0.25);
  s.median = quantile_sorted(values, 0.5);
  s.q3 = quantile_sorted(values, 0.75);
  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr;
  const double hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_low = s.q1;
  s.whisker_high = s.q3;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      ++s.n_outliers;
      continue;
    }
    s.whisker_low = std::min(s.whisker_low, v);
    s.whisker_high = std::max(s.whisker_high, v);
  }
  return s;
}

void Aggregator::add(const EpochRecord& record) {
  Cell& cell = cells_[Key{record.pt_dbm, record.mode}];
  const auto id = std::make_pair(record.run_id, record.epoch);
  if (!cell.se.emplace(id, record.se_bps_hz).second)
    throw std::invalid_argument("Aggregator: duplicate (run, epoch) record");
  if (std::isfinite(record.pae_deg)) cell.pae.emplace(id, record.pae_deg);
}

void Aggregator::merge(const Aggregator& other) {
  if (other.config_hash_ != config_hash_) throw std::invalid_argument("Aggregator: config hash mismatch");
  for (const auto& [key, cell] : other.cells_) {
    Cell& mine = cells_[key];
    for (const auto& [id, v] : cell.se)
      if (!mine.se.emplace(id, v).second) throw std::invalid_argument("Aggregator: duplicate (run, epoch) record");
    for (const auto& [id, v] : cell.pae) mine.pae.emplace(id, v);
  }
}

std::vector<SweepSummary> Aggregator::summaries() const {
  std::vector<SweepSummary> rows;
  for (const auto& [key, cell] : cells_) {
    double sum = 0.0;
    std::set<int> runs;
    for (const auto& [id, v] : cell.se) {
      sum += v;
      runs.insert(id.first);
    }
    rows.push_back({key.pt_dbm, key.mode, cell.se.empty() ? 0.0 : sum / static_cast<double>(cell.se.size()),
                    static_cast<int>(runs.size())});
  }
  return rows;
}

std::vector<double> Aggregator::mean_se_per_epoch(double pt_dbm, const std::string& mode) const {
  const auto it = cells_.find(Key{pt_dbm, mode});
  if (it == cells_.end()) return {};
  std::map<int, std::pair<double, int>> acc;
  for (const auto& [id, v] : it->second.se) {
    auto& a = acc[id.second];
    a.first += v;
    ++a.second;
  }
  std::vector<double> out;
  for (const auto& [epoch, a] : acc) {
    if (static_cast<int>(out.size()) <= epoch) out.resize(epoch + 1, std::nan(""));
    out[epoch] = a.first / a.second;
  }
  return out;
}

BoxStats Aggregator::pae_stats(double pt_dbm, const std::string& mode) const {
  const auto it = cells_.find(Key{pt_dbm, mode});
  if (it == cells_.end()) return {};
  std::vector<double> v;
  for (const auto& [id, x] : it->second.pae) v.push_back(x);
  return box_stats(std::move(v));
}

}  // namespace bisense
