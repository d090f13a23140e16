#include "bisense/error_model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bisense {

double crlb_aoa(double rho0, int n_symbols, int n_subcarriers, int n_rx) {
  if (!(rho0 > 0.0)) throw std::invalid_argument("crlb_aoa: rho0 must be positive");
  if (n_rx < 2) throw std::invalid_argument("crlb_aoa: need at least two channels");
  const double nm = static_cast<double>(n_symbols) * n_subcarriers;
  const double nr = n_rx;
  return (1.0 / (rho0 * nm)) * (1.0 + 1.0 / (nr * rho0)) * 6.0 / (nr * (nr * nr - 1.0));
}

double crlb_delay(double rho1, int oversampling, int n_subcarriers, double subcarrier_spacing_hz, int n_symbols,
                  double symbol_period_s) {
  if (!(rho1 > 0.0)) throw std::invalid_argument("crlb_delay: rho1 must be positive");
  const double s = oversampling;
  const double bw = n_subcarriers * subcarrier_spacing_hz;
  return 3.0 / (2.0 * kPi * kPi * s * s * bw * bw * rho1 * n_symbols * symbol_period_s);
}

SnrEstimates estimate_snrs(const Eigen::VectorXd& eigenvalues_desc, int n_sources, int n_antennas,
                           const Eigen::MatrixXcd& equalized, double tx_power_w, int n_users) {
  const Eigen::Index d = eigenvalues_desc.size();
  if (n_sources < 1 || n_sources >= d) throw std::invalid_argument("estimate_snrs: need 1 <= n_sources < channels");
  if (equalized.size() == 0) throw std::invalid_argument("estimate_snrs: empty equalized grid");
  SnrEstimates out;
  out.sigma2_est = eigenvalues_desc.tail(d - n_sources).mean();
  if (!(out.sigma2_est > 0.0)) {
    out.sigma2_est = std::numeric_limits<double>::min();
  }
  out.rho0_est = eigenvalues_desc[0] / (n_antennas * out.sigma2_est);
  const double mean_mag = equalized.cwiseAbs().mean();
  out.rho1_est = tx_power_w / (n_users * out.sigma2_est) * mean_mag * mean_mag;
  return out;
}

Eigen::Matrix2d measurement_jacobian(const Vec2& target, const Vec2& tx, const Vec2& rx) {
  const Vec2 from_tx = target - tx;
  const Vec2 from_rx = target - rx;
  const double d1 = from_tx.norm();
  const double d2 = from_rx.norm();
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw GeometryError("measurement_jacobian: target on a node");
  Eigen::Matrix2d J;
  J.row(0) = ((from_tx / d1 + from_rx / d2) / kSpeedOfLight).transpose();
  J(1, 0) = -from_rx.y() / (d2 * d2);
  J(1, 1) = from_rx.x() / (d2 * d2);
  return J;
}

double jacobian_condition(const Eigen::Matrix2d& J) {
  Eigen::Matrix2d scaled = J;
  for (int r = 0; r < 2; ++r) {
    const double n = J.row(r).norm();
    if (!(n > 0.0)) return std::numeric_limits<double>::infinity();
    scaled.row(r) /= n;
  }
  const Eigen::Vector2d sv = Eigen::JacobiSVD<Eigen::Matrix2d>(scaled).singularValues();
  if (!(sv[1] > 0.0)) return std::numeric_limits<double>::infinity();
  return sv[0] / sv[1];
}

PositionCovariance position_covariance(const Eigen::Matrix2d& J, double c_tau, double c_phi) {
  if (!(c_tau > 0.0) || !(c_phi > 0.0)) throw std::invalid_argument("position_covariance: variances must be positive");
  PositionCovariance out;
  out.jacobian = J;
  out.condition = jacobian_condition(J);
  if (!(out.condition <= kMaxJacobianCondition)) {
    out.gdop = std::numeric_limits<double>::infinity();
    return out;
  }
  // (J^T J)^-1 J^T reduces to J^-1 for a square J; forming J^T J would square
  // the conditioning.
  const Eigen::Matrix2d B = J.inverse();
  const Eigen::Matrix2d C = Eigen::Vector2d(c_tau, c_phi).asDiagonal();
  Eigen::Matrix2d S = B * C * B.transpose();
  S = 0.5 * (S + S.transpose());
  out.sigma = S;
  out.gdop = std::sqrt(S.trace());
  out.bounded = true;
  return out;
}

}  // namespace bisense
