#include "bisense/hda_frontend.hpp"

#include "bisense/channel_sim.hpp"
#include "bisense/signal_core.hpp"

#include <cmath>
#include <stdexcept>

namespace bisense {

namespace {
constexpr double kPiLocal = 3.14159265358979323846;
}

ReductionMatrix ReductionMatrix::identity(int n) {
  ReductionMatrix r;
  r.U = Eigen::MatrixXcd::Identity(n, n);
  r.center_bearing_rad = 0.0;
  r.thbw = 0.0;
  return r;
}

Eigen::MatrixXd dpss(int n, double nw, int count) {
  if (count < 1 || count > n) throw std::invalid_argument("dpss: count must be in [1, n]");
  // Eigenvectors of the commuting tridiagonal matrix (Slepian 1978).
  const double w = nw / n;
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double c = 0.5 * (n - 1 - 2.0 * i);
    T(i, i) = c * c * std::cos(2.0 * kPiLocal * w);
    if (i + 1 < n) {
      const double off = 0.5 * (i + 1) * (n - i - 1);
      T(i, i + 1) = off;
      T(i + 1, i) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  Eigen::MatrixXd out(n, count);
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd v = es.eigenvectors().col(n - 1 - k);
    // Sign convention: symmetric sequences sum positive, antisymmetric ones
    // start with a positive lobe.
    double ref = (k % 2 == 0) ? v.sum() : 0.0;
    if (k % 2 == 1) {
      for (int i = 0; i < n / 2; ++i) ref += (n - 1 - 2.0 * i) * v[i];
    }
    if (ref < 0.0) v = -v;
    out.col(k) = v.normalized();
  }
  return out;
}

ReductionMatrix build_reduction(double center_rad, int n_antennas, int n_rf, double thbw) {
  if (n_rf < 1 || n_rf > n_antennas) throw std::invalid_argument("build_reduction: need 1 <= n_rf <= n_antennas");
  if (!(thbw > 0.0)) throw std::invalid_argument("build_reduction: thbw must be positive");
  const Eigen::MatrixXd tapers = dpss(n_antennas, thbw, n_rf);
  const Eigen::VectorXcd phase = steering_vector(center_rad, n_antennas);

  ReductionMatrix r;
  r.center_bearing_rad = center_rad;
  r.thbw = thbw;
  r.U = phase.asDiagonal() * tapers.cast<cd>();
  // Modified Gram-Schmidt keeps each column's direction when the input is
  // already orthonormal, so recentering stays a pure phase modulation.
  for (int k = 0; k < n_rf; ++k) {
    for (int j = 0; j < k; ++j) r.U.col(k) -= r.U.col(j).dot(r.U.col(k)) * r.U.col(j);
    r.U.col(k).normalize();
  }
  return r;
}

RxFrame reduce_frame(const RxFrame& frame, const ReductionMatrix& reduction) {
  if (reduction.n_antennas() != frame.n_channels())
    throw std::invalid_argument("reduce_frame: reduction does not match frame channels");
  RxFrame out = frame;
  out.samples = reduction.U.adjoint() * frame.samples;
  return out;
}

Eigen::VectorXcd reduced_steering(const ReductionMatrix& reduction, double angle_rad) {
  return reduction.U.adjoint() * steering_vector(angle_rad, reduction.n_antennas());
}

}  // namespace bisense
