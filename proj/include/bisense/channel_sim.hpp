#pragma once

#include "bisense/scenario.hpp"
#include "bisense/signal_core.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <stdexcept>
#include <vector>

namespace bisense {

struct ReductionMatrix;

class ModelValidityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-user echo parameters at one receiver.
struct EchoParams {
  cd h{0.0, 0.0};
  double theta_rad = 0.0;  // true AoD at TX (relative to TX broadside)
  double phi_rad = 0.0;    // true AoA at RX (relative to RX broadside)
  double tau_s = 0.0;
  double doppler_hz = 0.0;
};

/// Post-OFDM-processing echo grid. Column n * M + m holds y[n, m].
struct RxFrame {
  int n_symbols = 0;
  int n_subcarriers = 0;
  int epoch_index = 0;
  int receiver_index = 0;
  Eigen::MatrixXcd samples;

  int n_channels() const { return static_cast<int>(samples.rows()); }
  Eigen::Index column(int n, int m) const { return static_cast<Eigen::Index>(n) * n_subcarriers + m; }
  auto sample(int n, int m) const { return samples.col(column(n, m)); }
};

/// |h|^2 = lambda^2 sigma / ((4 pi)^3 d1^2 d2^2), phase uniform in [-pi, pi).
cd reflection_coefficient(double d1_m, double d2_m, double wavelength_m, double rcs_m2, Rng& rng);

/// gamma = -(1/lambda) d(d1 + d2)/dt; positive while the TX-target-RX path shrinks.
double bistatic_doppler(const Vec2& velocity, const Vec2& target, const Vec2& tx, const Vec2& rx,
                        double wavelength_m);

/// Echo parameters of a target at `target` moving with `velocity` as seen by
/// receiver `rx_index`; draws the reflection phase from rng.
EchoParams make_echo(const ScenarioConfig& cfg, int rx_index, const Vec2& target, const Vec2& velocity, Rng& rng);

/// Throws ModelValidityError if tau > T_cp or |gamma| >= subcarrier_spacing / 10.
/// Without the cyclic-prefix check, tau is only required to stay below 1 / subcarrier_spacing.
void check_model_validity(const EchoParams& echo, const SystemParams& params, bool enforce_cyclic_prefix = true);

struct SynthesisOptions {
  bool add_noise = true;
  /// Include a(theta_l)^H f(theta_hat_k) leakage between users.
  bool cross_gain = false;
  bool enforce_cyclic_prefix = true;
};

/// Evaluates y[n,m] = sum_k h_k b(phi_k) a(theta_k)^H f_k zeta_k[n,m]
///                    e^{j 2 pi (n T_o gamma_k - m df tau_k)} + z[n,m].
RxFrame synthesize_rx_frame(const std::vector<EchoParams>& echoes, const std::vector<QpskGrid>& symbols,
                            const std::vector<Beamformer>& tx_beams, const SystemParams& params,
                            const SynthesisOptions& options, Rng& rng);

/// What the per-receiver estimator needs from an echo: the sample covariance
/// and the beamformed grid w^H y[n, m].
class EchoObservation {
 public:
  virtual ~EchoObservation() = default;
  virtual int n_channels() const = 0;
  virtual int n_symbols() const = 0;
  virtual int n_subcarriers() const = 0;
  virtual Eigen::MatrixXcd covariance() const = 0;
  /// N x M matrix of w^H y[n, m].
  virtual Eigen::MatrixXcd beamformed(const Eigen::VectorXcd& w) const = 0;
};

/// Single-user echo drawn directly from the joint law of (R, w^H Y) instead of
/// materializing every noise sample. With c[n, m] the noiseless temporal
/// signature and e = c / |c|, the noise splits into Z e^H ~ CN(0, s2 I), an
/// independent complex Wishart Z_perp Z_perp^H with NM - 1 degrees of
/// freedom, and a row w^H Z_perp whose direction is uniform on the
/// complement of e. The result has the same distribution as a frame from
/// synthesize_rx_frame followed by U^H projection. beamformed() may be called
/// once per observation.
class StatisticalObservation final : public EchoObservation {
 public:
  int n_channels() const override { return static_cast<int>(signal_plus_projection_.size()); }
  int n_symbols() const override { return static_cast<int>(signature_.rows()); }
  int n_subcarriers() const override { return static_cast<int>(signature_.cols()); }
  Eigen::MatrixXcd covariance() const override { return covariance_; }
  Eigen::MatrixXcd beamformed(const Eigen::VectorXcd& w) const override;

 private:
  friend StatisticalObservation synthesize_echo_statistics(const EchoParams&, const QpskGrid&, const Beamformer&,
                                                           const SystemParams&, const ReductionMatrix*, Rng&, bool);
  Eigen::MatrixXcd signature_;               // e[n, m], unit Frobenius norm
  Eigen::VectorXcd signal_plus_projection_;  // s |c| + Z e^H
  Eigen::MatrixXcd wishart_;                 // Z_perp Z_perp^H
  Eigen::MatrixXcd covariance_;
  Eigen::MatrixXcd direction_draw_;          // Gaussian N x M, projected on use
  mutable bool used_ = false;
};

StatisticalObservation synthesize_echo_statistics(const EchoParams& echo, const QpskGrid& symbols,
                                                  const Beamformer& tx_beam, const SystemParams& params,
                                                  const ReductionMatrix* reduction, Rng& rng,
                                                  bool enforce_cyclic_prefix = true);

/// Complex Wishart W = sum of `dof` outer products of CN(0, variance I_dim)
/// vectors, drawn through the Bartlett decomposition.
Eigen::MatrixXcd sample_complex_wishart(int dim, long dof, double variance, Rng& rng);

/// Fills a matrix with i.i.d. CN(0, variance) entries.
void fill_complex_gaussian(Eigen::MatrixXcd& out, double variance, Rng& rng);

/// Debug dump: "BSRF" magic, u32 version, u32 N_r, u32 N, u32 M, then
/// complex64 samples (float32 re, im) ordered by symbol, subcarrier, antenna.
/// Little-endian.
void write_frame_dump(const RxFrame& frame, const std::filesystem::path& path);
RxFrame read_frame_dump(const std::filesystem::path& path);

}  // namespace bisense
