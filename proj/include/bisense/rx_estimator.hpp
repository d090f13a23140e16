#pragma once

#include "bisense/channel_sim.hpp"
#include "bisense/scenario.hpp"
#include "bisense/signal_core.hpp"

#include <Eigen/Dense>

#include <vector>

namespace bisense {

struct ReductionMatrix;

/// (1/NM) sum_n sum_m y[n,m] y[n,m]^H.
Eigen::MatrixXcd sample_covariance(const RxFrame& frame);

/// EchoObservation backed by a materialized frame.
class FrameObservation final : public EchoObservation {
 public:
  explicit FrameObservation(RxFrame frame) : frame_(std::move(frame)) {}
  int n_channels() const override { return frame_.n_channels(); }
  int n_symbols() const override { return frame_.n_symbols; }
  int n_subcarriers() const override { return frame_.n_subcarriers; }
  Eigen::MatrixXcd covariance() const override { return sample_covariance(frame_); }
  Eigen::MatrixXcd beamformed(const Eigen::VectorXcd& w) const override;
  const RxFrame& frame() const { return frame_; }

 private:
  RxFrame frame_;
};

struct EigenDecomposition {
  Eigen::VectorXd values;    // descending
  Eigen::MatrixXcd vectors;  // column k pairs with values[k]
};

/// Throws std::invalid_argument unless |R - R^H|_F <= 1e-10 |R|_F.
EigenDecomposition hermitian_eigendecomposition(const Eigen::MatrixXcd& R);

/// Angles k * step with |k * step| < 90 deg.
std::vector<double> make_angle_grid(double step_rad);

/// Search grid with precomputed (possibly reduced) steering vectors.
struct SteeringTable {
  std::vector<double> angles_rad;
  Eigen::MatrixXcd steering;  // one column per angle
  Eigen::VectorXd norms2;
  double step_rad = 0.0;
};

SteeringTable make_steering_table(const std::vector<double>& grid, int n_antennas);

/// Projects a full-array table through U^H, keeping only angles whose
/// captured energy |U^H b|^2 / N_r is at least min_capture.
SteeringTable reduce_steering_table(const SteeringTable& full, const ReductionMatrix& reduction,
                                    double min_capture = 0.5);

struct MusicResult {
  double aoa_rad = 0.0;
  bool valid = false;
  int n_peaks = 0;
  double null_value = 1.0;  // normalized |E_n^H b|^2 / |b|^2 at the chosen grid point
};

/// MUSIC over the table. Peaks are local minima of the normalized null
/// spectrum that sit at least a factor 2 below its median; the one closest to
/// predicted_rad is refined by a 3-point parabola.
MusicResult music_aoa(const EigenDecomposition& eig, int n_sources, const SteeringTable& table,
                      double predicted_rad);
MusicResult music_aoa(const Eigen::MatrixXcd& R, int n_sources, const SteeringTable& table,
                      double predicted_rad);

/// r[n, m] = y_tilde[n, m] / zeta[n, m].
Eigen::MatrixXcd equalized_grid(const Eigen::MatrixXcd& beamformed, const QpskGrid& qpsk);
Eigen::MatrixXcd equalized_grid(const EchoObservation& obs, const Eigen::VectorXcd& w, const QpskGrid& qpsk);

struct DelayDopplerEstimate {
  double tau_hat_s = 0.0;
  double gamma_hat_hz = 0.0;
  double peak_power = 0.0;
  int delay_index = 0;
  int doppler_index = 0;  // signed, in [-SN/2, SN/2)
  bool edge = false;
};

DelayDopplerEstimate delay_doppler_estimate(const Eigen::MatrixXcd& r, int oversampling,
                                            double subcarrier_spacing_hz, double symbol_period_s);

struct PositionEstimate {
  Vec2 position{0.0, 0.0};
  int receiver_index = -1;
  double aoa_est_rad = 0.0;
  double tau_est_s = 0.0;
  double doppler_est_hz = 0.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double gdop = 0.0;
  bool valid = false;
};

/// d2 = (dR^2 - L^2) / (2 (dR - L cos psi)) along the estimated bearing
/// broadside + aoa. Invalid when dR <= L or the denominator is below 1e-6 dR.
PositionEstimate bistatic_position(double tau_s, double aoa_local_rad, const Vec2& rx, double rx_broadside_rad,
                                   const Vec2& tx);

}  // namespace bisense
