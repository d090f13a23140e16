#pragma once

#include <Eigen/Dense>

namespace bisense {

struct RxFrame;

/// Beamspace reduction for a hybrid receiver: N_r antennas -> N_rf RF chains.
/// Columns are Slepian (DPSS) sequences modulated toward `center_bearing_rad`.
struct ReductionMatrix {
  Eigen::MatrixXcd U;  // N_r x N_rf, orthonormal columns
  double center_bearing_rad = 0.0;
  double thbw = 1.0;

  int n_antennas() const { return static_cast<int>(U.rows()); }
  int n_rf() const { return static_cast<int>(U.cols()); }

  /// U = I_n; a reduction that changes nothing.
  static ReductionMatrix identity(int n);
};

/// First `count` discrete prolate spheroidal sequences of length n and
/// time-half-bandwidth product nw, ordered by concentration, unit norm.
Eigen::MatrixXd dpss(int n, double nw, int count);

ReductionMatrix build_reduction(double center_rad, int n_antennas, int n_rf, double thbw);

/// y_red[n, m] = U^H y[n, m].
RxFrame reduce_frame(const RxFrame& frame, const ReductionMatrix& reduction);

/// Effective steering vector in the reduced space, U^H b(angle).
Eigen::VectorXcd reduced_steering(const ReductionMatrix& reduction, double angle_rad);

}  // namespace bisense
