#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>

namespace bisense {

using cd = std::complex<double>;
using Rng = std::mt19937_64;

/// ULA response with half-wavelength spacing: element i is exp(j*pi*i*sin(angle)).
Eigen::VectorXcd steering_vector(double angle_rad, int n_antennas);

enum class BeamKind { transmit, receive };

struct Beamformer {
  Eigen::VectorXcd weights;
  double angle_rad = 0.0;
  BeamKind kind = BeamKind::transmit;
};

/// Unit-norm beam steering_vector(angle, n) / sqrt(n).
Beamformer make_beamformer(double angle_rad, int n_antennas, BeamKind kind);

/// |a(theta)^H f|^2 for a transmit beam f.
double beam_gain(double true_angle_rad, const Beamformer& beam);

/// Known QPSK payload, zeta[n, m] stored as row n (symbol), column m (subcarrier).
/// Mapping: bit pair (b0, b1) -> sqrt(P/2) * ((1 - 2 b0) + j (1 - 2 b1)).
struct QpskGrid {
  Eigen::MatrixXcd symbols;
  double per_symbol_power_w = 0.0;

  int n_symbols() const { return static_cast<int>(symbols.rows()); }
  int n_subcarriers() const { return static_cast<int>(symbols.cols()); }
};

QpskGrid generate_qpsk_grid(int n_symbols, int n_subcarriers, double power_w, Rng& rng);

}  // namespace bisense
