#include "bisense/signal_core.hpp"

#include <cmath>
#include <stdexcept>

namespace bisense {

namespace {
constexpr double kPiLocal = 3.14159265358979323846;
}

Eigen::VectorXcd steering_vector(double angle_rad, int n_antennas) {
  if (n_antennas < 1) throw std::invalid_argument("steering_vector: n_antennas must be >= 1");
  const double phase_step = kPiLocal * std::sin(angle_rad);
  Eigen::VectorXcd a(n_antennas);
  for (int i = 0; i < n_antennas; ++i) a[i] = std::polar(1.0, phase_step * i);
  return a;
}

Beamformer make_beamformer(double angle_rad, int n_antennas, BeamKind kind) {
  Beamformer b;
  b.weights = steering_vector(angle_rad, n_antennas) / std::sqrt(static_cast<double>(n_antennas));
  b.angle_rad = angle_rad;
  b.kind = kind;
  return b;
}

double beam_gain(double true_angle_rad, const Beamformer& beam) {
  const cd g = steering_vector(true_angle_rad, static_cast<int>(beam.weights.size())).dot(beam.weights);
  return std::norm(g);
}

QpskGrid generate_qpsk_grid(int n_symbols, int n_subcarriers, double power_w, Rng& rng) {
  if (!(power_w > 0.0)) throw std::invalid_argument("generate_qpsk_grid: power must be positive");
  QpskGrid grid;
  grid.per_symbol_power_w = power_w;
  grid.symbols.resize(n_symbols, n_subcarriers);
  const double amp = std::sqrt(power_w / 2.0);
  const cd points[4] = {{amp, amp}, {amp, -amp}, {-amp, amp}, {-amp, -amp}};
  // 64 random bits give 32 symbols.
  std::uint64_t bits = 0;
  int left = 0;
  for (int n = 0; n < n_symbols; ++n) {
    for (int m = 0; m < n_subcarriers; ++m) {
      if (left == 0) {
        bits = rng();
        left = 32;
      }
      grid.symbols(n, m) = points[bits & 3u];
      bits >>= 2;
      --left;
    }
  }
  return grid;
}

}  // namespace bisense
