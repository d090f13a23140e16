#pragma once

#include "bisense/scenario.hpp"

#include <Eigen/Dense>

namespace bisense {

struct SnrEstimates {
  double rho0_est = 0.0;
  double rho1_est = 0.0;
  double sigma2_est = 0.0;
};

/// C_phi = (1/(rho0 N M)) (1 + 1/(N_r rho0)) * 6 / (N_r (N_r^2 - 1)), rad^2.
double crlb_aoa(double rho0, int n_symbols, int n_subcarriers, int n_rx);

/// C_tau = 3 / (2 pi^2 S^2 (M df)^2 rho1 N T_o), s^2.
double crlb_delay(double rho1, int oversampling, int n_subcarriers, double subcarrier_spacing_hz, int n_symbols,
                  double symbol_period_s);

/// sigma2 = mean of the eigenvalues after the first n_sources;
/// rho0 = lambda_1 / (n_antennas sigma2);
/// rho1 = P_T / (K sigma2) * (mean_{n,m} |r[n,m]|)^2 with r = y_tilde / zeta.
SnrEstimates estimate_snrs(const Eigen::VectorXd& eigenvalues_desc, int n_sources, int n_antennas,
                           const Eigen::MatrixXcd& equalized, double tx_power_w, int n_users);

/// Rows: grad tau = (u_tx + u_rx) / c, grad phi = (-dy, dx) / d2^2,
/// evaluated at `target`, where u_node is the unit vector node -> target.
Eigen::Matrix2d measurement_jacobian(const Vec2& target, const Vec2& tx, const Vec2& rx);

/// Condition number of J after scaling each row to unit norm (the rows carry
/// different units). A zero row gives +inf.
double jacobian_condition(const Eigen::Matrix2d& J);

inline constexpr double kMaxJacobianCondition = 1e8;

struct PositionCovariance {
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d jacobian = Eigen::Matrix2d::Zero();
  double gdop = 0.0;
  double condition = 0.0;
  bool bounded = false;
};

/// Sigma = B diag(C_tau, C_phi) B^T with B = (J^T J)^{-1} J^T; gdop = sqrt(trace).
/// Unbounded (and Sigma left zero, gdop = inf) when the condition exceeds 1e8.
PositionCovariance position_covariance(const Eigen::Matrix2d& J, double c_tau, double c_phi);

}  // namespace bisense
