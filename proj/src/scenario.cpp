#include "bisense/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace bisense {

using nlohmann::json;

double wrap_angle(double rad) {
  double w = std::fmod(rad + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  return w - kPi;
}

double ula_local_angle(double global_bearing, double broadside) {
  double rel = wrap_angle(global_bearing - broadside);
  if (rel > kPi / 2) rel = kPi - rel;
  if (rel < -kPi / 2) rel = -kPi - rel;
  return rel;
}

void SystemParams::validate() const {
  auto positive = [](const char* name, double v) {
    if (!(v > 0.0)) throw ConfigError(name, "must be positive");
  };
  positive("n_tx_antennas", n_tx_antennas);
  positive("n_rx_antennas", n_rx_antennas);
  positive("carrier_freq_hz", carrier_freq_hz);
  positive("subcarrier_spacing_hz", subcarrier_spacing_hz);
  positive("n_subcarriers", n_subcarriers);
  positive("n_symbols", n_symbols);
  positive("cyclic_prefix_s", cyclic_prefix_s);
  positive("tx_power_w", tx_power_w);
  positive("n_users", n_users);
  positive("noise_psd_w_per_hz", noise_psd_w_per_hz);
  positive("rcs_m2", rcs_m2);
  positive("refresh_period_s", refresh_period_s);
  positive("gate_radius_m", gate_radius_m);
  positive("fft_oversampling", fft_oversampling);
  positive("max_range_m", max_range_m);
  positive("max_speed_mps", max_speed_mps);
  positive("n_select", n_select);
  positive("n_receivers", n_receivers);
  if (n_select > n_receivers) throw ConfigError("n_select", "must not exceed n_receivers");
  const double min_cp = max_range_m / kSpeedOfLight;
  if (cyclic_prefix_s < min_cp * (1.0 - 1e-12)) {
    std::ostringstream os;
    os << "cyclic prefix " << cyclic_prefix_s << " s is shorter than d_max/c = " << min_cp << " s";
    throw ConfigError("cyclic_prefix_s", os.str());
  }
}

void NodeGeometry::validate() const {
  if (rx_positions.empty()) throw ConfigError("geometry.receivers", "at least one receiver required");
  if (rx_positions.size() != rx_broadside_rad.size())
    throw ConfigError("geometry.receivers", "one broadside per receiver required");
  for (std::size_t i = 0; i < rx_positions.size(); ++i) {
    if ((rx_positions[i] - tx_position).norm() <= 0.0)
      throw ConfigError("geometry.receivers[" + std::to_string(i) + "]", "receiver coincides with TX");
    const double b = rx_broadside_rad[i];
    if (b < -kPi || b >= kPi)
      throw ConfigError("geometry.receivers[" + std::to_string(i) + "].broadside", "outside [-180, 180)");
  }
}

NodeGeometry NodeGeometry::reference_layout() {
  NodeGeometry g;
  g.tx_position = {0.0, 0.0};
  g.tx_broadside_rad = 0.0;
  g.rx_positions = {{0.0, 25.0}, {0.0, -25.0}, {55.0, 0.0}};
  g.rx_broadside_rad = {0.0, 0.0, -kPi};
  return g;
}

// ---------------------------------------------------------------------------
// Path primitives

namespace {

struct LengthVisitor {
  double operator()(const LineSegment& l) const { return (l.end - l.start).norm(); }
  double operator()(const ArcSegment& a) const { return std::abs(a.radius_m * a.sweep_rad); }
  double operator()(const ZigzagSegment& z) const { return z.leg_length_m * z.n_legs; }
};

Vec2 heading(double rad) { return {std::cos(rad), std::sin(rad)}; }

int zigzag_leg(const ZigzagSegment& z, double s) {
  int leg = static_cast<int>(std::floor(s / z.leg_length_m));
  return std::clamp(leg, 0, z.n_legs - 1);
}

double zigzag_leg_heading(const ZigzagSegment& z, int leg) {
  return (leg % 2 == 0) ? z.first_heading_rad : z.second_heading_rad;
}

Vec2 zigzag_corner(const ZigzagSegment& z, int leg) {
  Vec2 p = z.start;
  for (int k = 0; k < leg; ++k) p += z.leg_length_m * heading(zigzag_leg_heading(z, k));
  return p;
}

}  // namespace

double segment_length(const PathSegment& seg) { return std::visit(LengthVisitor{}, seg); }

Vec2 arc_point_at_angle(const ArcSegment& arc, double polar_angle_rad) {
  return arc.center + arc.radius_m * heading(polar_angle_rad);
}

Vec2 segment_point(const PathSegment& seg, double s) {
  if (auto* l = std::get_if<LineSegment>(&seg)) {
    const double len = (l->end - l->start).norm();
    return l->start + (s / len) * (l->end - l->start);
  }
  if (auto* a = std::get_if<ArcSegment>(&seg)) {
    const double dir = a->sweep_rad >= 0 ? 1.0 : -1.0;
    return arc_point_at_angle(*a, a->start_angle_rad + dir * s / a->radius_m);
  }
  const auto& z = std::get<ZigzagSegment>(seg);
  const int leg = zigzag_leg(z, s);
  return zigzag_corner(z, leg) + (s - leg * z.leg_length_m) * heading(zigzag_leg_heading(z, leg));
}

Vec2 segment_tangent(const PathSegment& seg, double s) {
  if (auto* l = std::get_if<LineSegment>(&seg)) return (l->end - l->start).normalized();
  if (auto* a = std::get_if<ArcSegment>(&seg)) {
    const double dir = a->sweep_rad >= 0 ? 1.0 : -1.0;
    const double ang = a->start_angle_rad + dir * s / a->radius_m;
    return dir * Vec2{-std::sin(ang), std::cos(ang)};
  }
  const auto& z = std::get<ZigzagSegment>(seg);
  return heading(zigzag_leg_heading(z, zigzag_leg(z, s)));
}

Vec2 segment_start(const PathSegment& seg) { return segment_point(seg, 0.0); }

Vec2 segment_end(const PathSegment& seg) {
  if (auto* l = std::get_if<LineSegment>(&seg)) return l->end;
  if (auto* a = std::get_if<ArcSegment>(&seg)) return arc_point_at_angle(*a, a->start_angle_rad + a->sweep_rad);
  const auto& z = std::get<ZigzagSegment>(seg);
  return zigzag_corner(z, z.n_legs);
}

double TrajectorySpec::total_length() const {
  double total = 0.0;
  for (const auto& seg : segments) total += segment_length(seg);
  return total;
}

namespace {

// Returns (segment index, local arc length) for global arc length s; the
// segment that starts at s wins at a join.
std::pair<std::size_t, double> locate(const TrajectorySpec& spec, double s) {
  for (std::size_t i = 0; i < spec.segments.size(); ++i) {
    const double len = segment_length(spec.segments[i]);
    if (s < len || i + 1 == spec.segments.size()) return {i, std::min(s, len)};
    s -= len;
  }
  throw GeometryError("empty trajectory");
}

}  // namespace

Vec2 TrajectorySpec::point_at(double s) const {
  auto [i, local] = locate(*this, std::max(0.0, s));
  return segment_point(segments[i], local);
}

Vec2 TrajectorySpec::tangent_at(double s) const {
  auto [i, local] = locate(*this, std::max(0.0, s));
  return segment_tangent(segments[i], local);
}

Vec2 TrajectorySpec::start_point() const {
  if (segments.empty()) throw GeometryError("empty trajectory");
  return segment_start(segments.front());
}

Vec2 TrajectorySpec::end_point() const {
  if (segments.empty()) throw GeometryError("empty trajectory");
  return segment_end(segments.back());
}

void TrajectorySpec::validate() const {
  if (segments.empty()) throw ConfigError("trajectory.segments", "no segments");
  if (!(step_length_m > 0.0)) throw ConfigError("trajectory.step_length_m", "must be positive");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!(segment_length(segments[i]) > 0.0))
      throw ConfigError("trajectory.segments[" + std::to_string(i) + "]", "zero-length segment");
    if (auto* z = std::get_if<ZigzagSegment>(&segments[i]); z && z->n_legs < 1)
      throw ConfigError("trajectory.segments[" + std::to_string(i) + "]", "zigzag needs at least one leg");
    if (i > 0 && (segment_end(segments[i - 1]) - segment_start(segments[i])).norm() > 1e-6)
      throw ConfigError("trajectory.segments[" + std::to_string(i) + "]", "not connected to previous segment");
  }
}

TrajectorySpec build_paper_trajectory() {
  TrajectorySpec spec;
  spec.segments.push_back(LineSegment{{27.5, 25.0}, {27.5, 12.5}});
  const ArcSegment arc{{27.5, 0.0}, 12.5, deg2rad(90.0), deg2rad(220.0)};
  spec.segments.push_back(arc);
  spec.segments.push_back(ZigzagSegment{segment_end(arc), 8.0, 3, deg2rad(-60.0), deg2rad(60.0)});
  spec.step_length_m = 1.0;
  return spec;
}

std::vector<WaypointState> sample_waypoints(const TrajectorySpec& spec, double refresh_period_s) {
  spec.validate();
  if (!(refresh_period_s > 0.0)) throw ConfigError("refresh_period_s", "must be positive");
  const double step = spec.step_length_m;
  const double total = spec.total_length();
  const double speed = step / refresh_period_s;
  // Arc-length sampling; a path end within 1% of a step counts as the last sample.
  const auto n_steps = static_cast<long>(std::floor(total / step + 0.01));

  std::vector<WaypointState> out;
  for (long k = 0; k <= n_steps; ++k) {
    const double s = std::min(static_cast<double>(k) * step, total);
    out.push_back({static_cast<int>(k), spec.point_at(s), speed * spec.tangent_at(s)});
  }
  if (out.size() < 3) throw GeometryError("trajectory shorter than three steps");
  return out;
}

BistaticGeometry bistatic_geometry(const Vec2& tx, double tx_broadside, const Vec2& rx,
                                   double rx_broadside, const Vec2& target) {
  const Vec2 to_tx = target - tx;
  const Vec2 to_rx = target - rx;
  const double d1 = to_tx.norm();
  const double d2 = to_rx.norm();
  const double scale = std::max({1.0, tx.norm(), rx.norm(), target.norm()});
  if (d1 <= 1e-12 * scale) throw GeometryError("target coincides with TX");
  if (d2 <= 1e-12 * scale) throw GeometryError("target coincides with RX");
  const Vec2 rx_to_tx = tx - rx;
  const double L = rx_to_tx.norm();

  BistaticGeometry g{};
  g.d1_m = d1;
  g.d2_m = d2;
  g.sum_range_m = d1 + d2;
  g.baseline_m = L;
  g.rx_global_bearing_rad = std::atan2(to_rx.y(), to_rx.x());
  g.rx_local_aoa_rad = ula_local_angle(g.rx_global_bearing_rad, rx_broadside);
  if (L > 0.0) {
    const double c = std::clamp(rx_to_tx.dot(to_rx) / (L * d2), -1.0, 1.0);
    g.rx_baseline_angle_rad = std::acos(c);
  }
  g.tx_aod_rad = ula_local_angle(std::atan2(to_tx.y(), to_tx.x()), tx_broadside);
  return g;
}

// ---------------------------------------------------------------------------
// Configuration I/O

namespace {

Vec2 read_vec2(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(field, "expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(section + "." + key, e.what());
  }
}

PathSegment read_segment(const json& j, const std::string& field) {
  const std::string type = j.value("type", "");
  if (type == "line") return LineSegment{read_vec2(j.at("start"), field + ".start"), read_vec2(j.at("end"), field + ".end")};
  if (type == "arc")
    return ArcSegment{read_vec2(j.at("center"), field + ".center"), j.at("radius_m").get<double>(),
                      deg2rad(j.at("start_angle_deg").get<double>()), deg2rad(j.at("sweep_deg").get<double>())};
  if (type == "zigzag")
    return ZigzagSegment{read_vec2(j.at("start"), field + ".start"), j.at("leg_length_m").get<double>(),
                         j.at("n_legs").get<int>(), deg2rad(j.at("first_heading_deg").get<double>()),
                         deg2rad(j.at("second_heading_deg").get<double>())};
  throw ConfigError(field + ".type", "unknown segment type '" + type + "'");
}

json segment_json(const PathSegment& seg) {
  if (auto* l = std::get_if<LineSegment>(&seg))
    return {{"type", "line"}, {"start", {l->start.x(), l->start.y()}}, {"end", {l->end.x(), l->end.y()}}};
  if (auto* a = std::get_if<ArcSegment>(&seg))
    return {{"type", "arc"},
            {"center", {a->center.x(), a->center.y()}},
            {"radius_m", a->radius_m},
            {"start_angle_deg", rad2deg(a->start_angle_rad)},
            {"sweep_deg", rad2deg(a->sweep_rad)}};
  const auto& z = std::get<ZigzagSegment>(seg);
  return {{"type", "zigzag"},
          {"start", {z.start.x(), z.start.y()}},
          {"leg_length_m", z.leg_length_m},
          {"n_legs", z.n_legs},
          {"first_heading_deg", rad2deg(z.first_heading_rad)},
          {"second_heading_deg", rad2deg(z.second_heading_rad)}};
}

}  // namespace

ScenarioConfig ScenarioConfig::reference() {
  ScenarioConfig cfg;
  cfg.trajectory = build_paper_trajectory();
  return cfg;
}

namespace {

ScenarioConfig config_from_json(const json& root) {
  ScenarioConfig cfg = ScenarioConfig::reference();
  SystemParams& sys = cfg.system;

  const json sj = root.value("system", json::object());
  read_opt(sj, "n_tx_antennas", sys.n_tx_antennas, "system");
  read_opt(sj, "n_rx_antennas", sys.n_rx_antennas, "system");
  read_opt(sj, "carrier_freq_hz", sys.carrier_freq_hz, "system");
  read_opt(sj, "subcarrier_spacing_hz", sys.subcarrier_spacing_hz, "system");
  read_opt(sj, "n_subcarriers", sys.n_subcarriers, "system");
  read_opt(sj, "n_symbols", sys.n_symbols, "system");
  read_opt(sj, "n_users", sys.n_users, "system");
  read_opt(sj, "noise_psd_w_per_hz", sys.noise_psd_w_per_hz, "system");
  read_opt(sj, "refresh_period_s", sys.refresh_period_s, "system");
  read_opt(sj, "gate_radius_m", sys.gate_radius_m, "system");
  read_opt(sj, "fft_oversampling", sys.fft_oversampling, "system");
  read_opt(sj, "max_range_m", sys.max_range_m, "system");
  read_opt(sj, "max_speed_mps", sys.max_speed_mps, "system");
  read_opt(sj, "n_select", sys.n_select, "system");
  sys.cyclic_prefix_s = sys.max_range_m / kSpeedOfLight;
  read_opt(sj, "cyclic_prefix_s", sys.cyclic_prefix_s, "system");
  read_opt(sj, "tx_power_w", sys.tx_power_w, "system");
  read_opt(sj, "rcs_m2", sys.rcs_m2, "system");
  if (sj.contains("tx_power_dbm")) sys.tx_power_w = dbm_to_watts(sj.at("tx_power_dbm").get<double>());
  if (sj.contains("rcs_dbsm")) sys.rcs_m2 = db_to_linear(sj.at("rcs_dbsm").get<double>());

  if (root.contains("geometry")) {
    const json& gj = root.at("geometry");
    if (gj.contains("tx")) cfg.geometry.tx_position = read_vec2(gj.at("tx"), "geometry.tx");
    read_opt(gj, "tx_broadside_rad", cfg.geometry.tx_broadside_rad, "geometry");
    if (gj.contains("tx_broadside_deg")) cfg.geometry.tx_broadside_rad = deg2rad(gj.at("tx_broadside_deg").get<double>());
    if (gj.contains("receivers")) {
      cfg.geometry.rx_positions.clear();
      cfg.geometry.rx_broadside_rad.clear();
      int i = 0;
      for (const auto& rj : gj.at("receivers")) {
        const std::string f = "geometry.receivers[" + std::to_string(i++) + "]";
        cfg.geometry.rx_positions.push_back(read_vec2(rj.at("position"), f + ".position"));
        cfg.geometry.rx_broadside_rad.push_back(rj.contains("broadside_rad") ? rj.at("broadside_rad").get<double>()
                                                                             : deg2rad(rj.value("broadside_deg", 0.0)));
      }
    }
  }
  sys.n_receivers = static_cast<int>(cfg.geometry.n_receivers());
  if (sj.contains("n_receivers") && sj.at("n_receivers").get<int>() != sys.n_receivers)
    throw ConfigError("system.n_receivers", "does not match geometry.receivers");

  if (root.contains("trajectory")) {
    const json& tj = root.at("trajectory");
    const std::string preset = tj.value("preset", tj.contains("segments") ? "" : "paper");
    if (preset == "paper") {
      cfg.trajectory = build_paper_trajectory();
    } else if (!preset.empty()) {
      throw ConfigError("trajectory.preset", "unknown preset '" + preset + "'");
    } else {
      cfg.trajectory.segments.clear();
      int i = 0;
      for (const auto& segj : tj.at("segments"))
        cfg.trajectory.segments.push_back(read_segment(segj, "trajectory.segments[" + std::to_string(i++) + "]"));
    }
    read_opt(tj, "step_length_m", cfg.trajectory.step_length_m, "trajectory");
  }

  if (root.contains("sweep")) {
    const json& wj = root.at("sweep");
    read_opt(wj, "tx_power_dbm", cfg.sweep.tx_power_dbm, "sweep");
    read_opt(wj, "modes", cfg.sweep.modes, "sweep");
    read_opt(wj, "runs", cfg.sweep.runs, "sweep");
  }
  if (root.contains("seeds")) read_opt(root.at("seeds"), "master", cfg.master_seed, "seeds");

  if (root.contains("receiver")) {
    const json& rj = root.at("receiver");
    const std::string arch = rj.value("architecture", "digital");
    if (arch == "digital") cfg.receiver.architecture = Architecture::digital;
    else if (arch == "hda") cfg.receiver.architecture = Architecture::hda;
    else throw ConfigError("receiver.architecture", "expected digital or hda");
    if (rj.contains("hda")) {
      read_opt(rj.at("hda"), "n_rf", cfg.receiver.n_rf, "receiver.hda");
      read_opt(rj.at("hda"), "thbw", cfg.receiver.thbw, "receiver.hda");
      read_opt(rj.at("hda"), "identity_reduction", cfg.receiver.identity_reduction, "receiver.hda");
    }
  }
  if (root.contains("estimator")) {
    const json& ej = root.at("estimator");
    read_opt(ej, "music_step_deg", cfg.estimator.music_step_deg, "estimator");
    read_opt(ej, "cphi_cos2_correction", cfg.estimator.cphi_cos2_correction, "estimator");
    read_opt(ej, "cross_gain_model", cfg.estimator.cross_gain_model, "estimator");
    read_opt(ej, "fast_statistics", cfg.estimator.fast_statistics, "estimator");
    read_opt(ej, "enforce_cyclic_prefix", cfg.estimator.enforce_cyclic_prefix, "estimator");
  }

  sys.validate();
  cfg.geometry.validate();
  cfg.trajectory.validate();
  if (cfg.receiver.n_rf < 1 || cfg.receiver.n_rf > sys.n_rx_antennas)
    throw ConfigError("receiver.hda.n_rf", "must be in [1, n_rx_antennas]");
  if (!(cfg.receiver.thbw > 0.0)) throw ConfigError("receiver.hda.thbw", "must be positive");
  if (cfg.receiver.identity_reduction && cfg.receiver.n_rf != sys.n_rx_antennas)
    throw ConfigError("receiver.hda.identity_reduction", "requires n_rf == n_rx_antennas");
  if (!(cfg.estimator.music_step_deg > 0.0)) throw ConfigError("estimator.music_step_deg", "must be positive");
  if (cfg.sweep.runs < 1) throw ConfigError("sweep.runs", "must be positive");
  return cfg;
}

}  // namespace

ScenarioConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("parse error: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("<file>", "top level must be an object");
  try {
    return config_from_json(root);
  } catch (const json::exception& e) {
    throw ConfigError("<file>", e.what());
  }
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_config_json(const ScenarioConfig& cfg) {
  const SystemParams& s = cfg.system;
  json j;
  j["system"] = {{"n_tx_antennas", s.n_tx_antennas},
                 {"n_rx_antennas", s.n_rx_antennas},
                 {"carrier_freq_hz", s.carrier_freq_hz},
                 {"subcarrier_spacing_hz", s.subcarrier_spacing_hz},
                 {"n_subcarriers", s.n_subcarriers},
                 {"n_symbols", s.n_symbols},
                 {"cyclic_prefix_s", s.cyclic_prefix_s},
                 {"tx_power_w", s.tx_power_w},
                 {"n_users", s.n_users},
                 {"noise_psd_w_per_hz", s.noise_psd_w_per_hz},
                 {"rcs_m2", s.rcs_m2},
                 {"refresh_period_s", s.refresh_period_s},
                 {"gate_radius_m", s.gate_radius_m},
                 {"fft_oversampling", s.fft_oversampling},
                 {"max_range_m", s.max_range_m},
                 {"max_speed_mps", s.max_speed_mps},
                 {"n_select", s.n_select},
                 {"n_receivers", s.n_receivers}};
  json rx = json::array();
  for (std::size_t i = 0; i < cfg.geometry.n_receivers(); ++i)
    rx.push_back({{"position", {cfg.geometry.rx_positions[i].x(), cfg.geometry.rx_positions[i].y()}},
                  {"broadside_rad", cfg.geometry.rx_broadside_rad[i]}});
  j["geometry"] = {{"tx", {cfg.geometry.tx_position.x(), cfg.geometry.tx_position.y()}},
                   {"tx_broadside_rad", cfg.geometry.tx_broadside_rad},
                   {"receivers", rx}};
  json segs = json::array();
  for (const auto& seg : cfg.trajectory.segments) segs.push_back(segment_json(seg));
  j["trajectory"] = {{"segments", segs}, {"step_length_m", cfg.trajectory.step_length_m}};
  j["sweep"] = {{"tx_power_dbm", cfg.sweep.tx_power_dbm}, {"modes", cfg.sweep.modes}, {"runs", cfg.sweep.runs}};
  j["seeds"] = {{"master", cfg.master_seed}};
  j["receiver"] = {{"architecture", cfg.receiver.architecture == Architecture::hda ? "hda" : "digital"},
                   {"hda",
                    {{"n_rf", cfg.receiver.n_rf},
                     {"thbw", cfg.receiver.thbw},
                     {"identity_reduction", cfg.receiver.identity_reduction}}}};
  j["estimator"] = {{"music_step_deg", cfg.estimator.music_step_deg},
                    {"cphi_cos2_correction", cfg.estimator.cphi_cos2_correction},
                    {"cross_gain_model", cfg.estimator.cross_gain_model},
                    {"fast_statistics", cfg.estimator.fast_statistics},
                    {"enforce_cyclic_prefix", cfg.estimator.enforce_cyclic_prefix}};
  return j.dump();
}

std::uint64_t config_hash(const ScenarioConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical_config_json(cfg)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace bisense
