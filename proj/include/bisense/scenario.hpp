#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace bisense {

using Vec2 = Eigen::Vector2d;

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }
inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Wraps an angle to [-pi, pi).
double wrap_angle(double rad);

/// Raised when a configuration value violates a physical or structural invariant.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Waveform, array, and tracking parameters. Defaults reproduce the reference
/// 60 GHz setup (64-element arrays, 512 subcarriers at 1 MHz, 64 symbols).
struct SystemParams {
  int n_tx_antennas = 64;
  int n_rx_antennas = 64;
  double carrier_freq_hz = 60e9;
  double subcarrier_spacing_hz = 1e6;
  int n_subcarriers = 512;
  int n_symbols = 64;
  double cyclic_prefix_s = 100.0 / kSpeedOfLight;
  double tx_power_w = 3.1622776601683795e-3;  // 5 dBm
  int n_users = 1;
  double noise_psd_w_per_hz = 2e-21;
  double rcs_m2 = 100.0;  // 20 dBsm
  double refresh_period_s = 0.1;
  double gate_radius_m = 6.0;
  int fft_oversampling = 1;
  double max_range_m = 100.0;
  double max_speed_mps = 30.0;
  int n_select = 2;
  int n_receivers = 3;

  double symbol_period_s() const { return 1.0 / subcarrier_spacing_hz + cyclic_prefix_s; }
  double wavelength_m() const { return kSpeedOfLight / carrier_freq_hz; }
  double bandwidth_hz() const { return n_subcarriers * subcarrier_spacing_hz; }
  double noise_variance_w() const { return noise_psd_w_per_hz * bandwidth_hz(); }
  /// Doppler bound implied by v_max for a closing bistatic path.
  double max_doppler_hz() const { return 2.0 * max_speed_mps / wavelength_m(); }

  /// Throws ConfigError naming the first violated field.
  void validate() const;
};

/// Node positions in the global frame. Bearings are measured from +x,
/// counter-clockwise.
struct NodeGeometry {
  Vec2 tx_position{0.0, 0.0};
  double tx_broadside_rad = 0.0;
  std::vector<Vec2> rx_positions;
  std::vector<double> rx_broadside_rad;

  std::size_t n_receivers() const { return rx_positions.size(); }
  void validate() const;

  /// TX at the origin, RX0 (0,25), RX1 (0,-25), RX2 (55,0).
  static NodeGeometry reference_layout();
};

struct LineSegment {
  Vec2 start;
  Vec2 end;
};

/// Circular arc; sweep is signed (positive = counter-clockwise).
struct ArcSegment {
  Vec2 center;
  double radius_m;
  double start_angle_rad;
  double sweep_rad;
};

/// Connected straight legs of equal length alternating between two headings.
struct ZigzagSegment {
  Vec2 start;
  double leg_length_m;
  int n_legs;
  double first_heading_rad;
  double second_heading_rad;
};

using PathSegment = std::variant<LineSegment, ArcSegment, ZigzagSegment>;

double segment_length(const PathSegment& seg);
Vec2 segment_point(const PathSegment& seg, double s);
/// Unit tangent at arc length s.
Vec2 segment_tangent(const PathSegment& seg, double s);
Vec2 segment_start(const PathSegment& seg);
Vec2 segment_end(const PathSegment& seg);
Vec2 arc_point_at_angle(const ArcSegment& arc, double polar_angle_rad);

struct TrajectorySpec {
  std::vector<PathSegment> segments;
  double step_length_m = 1.0;

  double total_length() const;
  Vec2 point_at(double s) const;
  Vec2 tangent_at(double s) const;
  Vec2 start_point() const;
  Vec2 end_point() const;
  /// Checks joins (C0 within 1e-6 m) and positive lengths.
  void validate() const;
};

struct WaypointState {
  int epoch = 0;
  Vec2 position;
  Vec2 velocity;
};

struct BistaticGeometry {
  double d1_m;
  double d2_m;
  double sum_range_m;
  double baseline_m;
  double rx_local_aoa_rad;      // relative to RX broadside, in [-pi/2, pi/2]
  double rx_global_bearing_rad; // bearing of (target - rx)
  double rx_baseline_angle_rad; // interior angle at RX, in [0, pi]
  double tx_aod_rad;            // relative to TX broadside, in [-pi/2, pi/2]
};

enum class Architecture { digital, hda };

struct ReceiverOptions {
  Architecture architecture = Architecture::digital;
  int n_rf = 4;
  double thbw = 1.0;
  /// Use U = I instead of the Slepian beamspace (n_rf must equal N_r).
  bool identity_reduction = false;
};

struct EstimatorOptions {
  double music_step_deg = 0.02;
  /// Multiply C_phi by 1/cos^2(phi) (electrical-to-spatial angle correction).
  bool cphi_cos2_correction = false;
  /// Keep a(theta_l)^H f(theta_hat_k) cross terms between users in synthesis.
  bool cross_gain_model = false;
  /// Draw echo sufficient statistics instead of full N_r x N x M frames.
  bool fast_statistics = true;
  /// Treat echoes delayed beyond the cyclic prefix as missed measurements.
  bool enforce_cyclic_prefix = false;
};

struct SweepSpec {
  std::vector<double> tx_power_dbm{5.0};
  std::vector<std::string> modes{"rx0", "rx1", "rx2", "fuse", "oracle"};
  int runs = 20;
};

struct ScenarioConfig {
  SystemParams system;
  NodeGeometry geometry = NodeGeometry::reference_layout();
  TrajectorySpec trajectory;
  SweepSpec sweep;
  std::uint64_t master_seed = 20240101;
  ReceiverOptions receiver;
  EstimatorOptions estimator;

  /// The reference scenario with the built-in path.
  static ScenarioConfig reference();
};

/// Parses and validates a JSON config. Missing fields take reference defaults.
ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig parse_config(const std::string& json_text);
/// Canonical JSON (sorted keys, SI units) of the effective configuration.
std::string canonical_config_json(const ScenarioConfig& cfg);
/// FNV-1a over the canonical JSON; stable under key reordering of the input.
std::uint64_t config_hash(const ScenarioConfig& cfg);

TrajectorySpec build_paper_trajectory();

/// Waypoints spaced exactly step_length_m apart (Euclidean) along the path,
/// with velocity = unit tangent * step_length_m / refresh_period.
std::vector<WaypointState> sample_waypoints(const TrajectorySpec& spec, double refresh_period_s);

BistaticGeometry bistatic_geometry(const Vec2& tx, double tx_broadside, const Vec2& rx,
                                   double rx_broadside, const Vec2& target);

/// Angle of a global bearing as seen by a ULA with the given broadside,
/// folded into [-pi/2, pi/2] (a ULA only observes sin of the angle).
double ula_local_angle(double global_bearing, double broadside);

}  // namespace bisense
