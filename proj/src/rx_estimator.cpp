#include "bisense/rx_estimator.hpp"

#include "bisense/hda_frontend.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace bisense {

Eigen::MatrixXcd sample_covariance(const RxFrame& frame) {
  const Eigen::Index snapshots = frame.samples.cols();
  if (snapshots == 0) throw std::invalid_argument("sample_covariance: empty frame");
  Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(frame.n_channels(), frame.n_channels());
  R.selfadjointView<Eigen::Lower>().rankUpdate(frame.samples, 1.0 / static_cast<double>(snapshots));
  R.triangularView<Eigen::StrictlyUpper>() = R.adjoint();
  return R;
}

Eigen::MatrixXcd FrameObservation::beamformed(const Eigen::VectorXcd& w) const {
  if (w.size() != frame_.n_channels()) throw std::invalid_argument("beamformed: weight length mismatch");
  const Eigen::RowVectorXcd row = w.adjoint() * frame_.samples;
  using RowMajor = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(row.data(), frame_.n_symbols, frame_.n_subcarriers);
}

EigenDecomposition hermitian_eigendecomposition(const Eigen::MatrixXcd& R) {
  if (R.rows() != R.cols()) throw std::invalid_argument("hermitian_eigendecomposition: matrix not square");
  const double scale = R.norm();
  if ((R - R.adjoint()).norm() > 1e-10 * scale)
    throw std::invalid_argument("hermitian_eigendecomposition: matrix not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(R);
  if (es.info() != Eigen::Success) throw std::runtime_error("hermitian_eigendecomposition: no convergence");
  EigenDecomposition out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

std::vector<double> make_angle_grid(double step_rad) {
  if (!(step_rad > 0.0)) throw std::invalid_argument("make_angle_grid: step must be positive");
  const double limit = kPi / 2.0;
  const long kmax = static_cast<long>(std::ceil(limit / step_rad));
  std::vector<double> grid;
  for (long k = -kmax; k <= kmax; ++k) {
    const double a = k * step_rad;
    if (std::abs(a) < limit) grid.push_back(a);
  }
  return grid;
}

SteeringTable make_steering_table(const std::vector<double>& grid, int n_antennas) {
  SteeringTable t;
  t.angles_rad = grid;
  t.step_rad = grid.size() > 1 ? grid[1] - grid[0] : 0.0;
  t.steering.resize(n_antennas, static_cast<Eigen::Index>(grid.size()));
  for (std::size_t g = 0; g < grid.size(); ++g) t.steering.col(static_cast<Eigen::Index>(g)) = steering_vector(grid[g], n_antennas);
  t.norms2 = t.steering.colwise().squaredNorm().transpose();
  return t;
}

SteeringTable reduce_steering_table(const SteeringTable& full, const ReductionMatrix& reduction, double min_capture) {
  if (reduction.n_antennas() != full.steering.rows())
    throw std::invalid_argument("reduce_steering_table: reduction does not match table");
  const Eigen::MatrixXcd projected = reduction.U.adjoint() * full.steering;
  const Eigen::VectorXd captured = projected.colwise().squaredNorm().transpose();
  const Eigen::VectorXd ratio = captured.cwiseQuotient(full.norms2);
  Eigen::Index best = 0;
  ratio.maxCoeff(&best);
  SteeringTable t;
  t.step_rad = full.step_rad;
  if (ratio[best] < min_capture) return t;
  Eigen::Index lo = best;
  Eigen::Index hi = best;
  while (lo > 0 && ratio[lo - 1] >= min_capture) --lo;
  while (hi + 1 < ratio.size() && ratio[hi + 1] >= min_capture) ++hi;
  const Eigen::Index count = hi - lo + 1;
  t.angles_rad.assign(full.angles_rad.begin() + lo, full.angles_rad.begin() + hi + 1);
  t.steering = projected.middleCols(lo, count);
  t.norms2 = captured.segment(lo, count);
  return t;
}

MusicResult music_aoa(const EigenDecomposition& eig, int n_sources, const SteeringTable& table,
                      double predicted_rad) {
  const Eigen::Index dim = eig.vectors.rows();
  if (n_sources < 1 || n_sources >= dim) throw std::invalid_argument("music_aoa: need 1 <= n_sources < channels");
  if (table.steering.rows() != dim) throw std::invalid_argument("music_aoa: steering table dimension mismatch");
  MusicResult result;
  const Eigen::Index G = table.steering.cols();
  if (G < 3) return result;

  // |E_n^H b|^2 = |b|^2 - |E_s^H b|^2 for an orthonormal eigenbasis.
  const Eigen::MatrixXcd signal_proj = eig.vectors.leftCols(n_sources).adjoint() * table.steering;
  const Eigen::VectorXd signal_energy = signal_proj.colwise().squaredNorm().transpose();
  Eigen::VectorXd q = (table.norms2 - signal_energy).cwiseQuotient(table.norms2);
  q = q.cwiseMax(0.0);

  std::vector<double> sorted(q.data(), q.data() + G);
  std::nth_element(sorted.begin(), sorted.begin() + G / 2, sorted.end());
  const double threshold = 0.5 * sorted[G / 2];

  Eigen::Index chosen = -1;
  double best_dist = 0.0;
  for (Eigen::Index i = 1; i + 1 < G; ++i) {
    if (!(q[i] < q[i - 1] && q[i] <= q[i + 1])) continue;
    if (q[i] > threshold) continue;
    ++result.n_peaks;
    const double dist = std::abs(table.angles_rad[i] - predicted_rad);
    if (chosen < 0 || dist < best_dist || (dist == best_dist && q[i] < q[chosen])) {
      chosen = i;
      best_dist = dist;
    }
  }
  if (chosen < 0) return result;

  const double qm = q[chosen - 1];
  const double q0 = q[chosen];
  const double qp = q[chosen + 1];
  const double curvature = qm - 2.0 * q0 + qp;
  double delta = curvature > 0.0 ? 0.5 * (qm - qp) / curvature : 0.0;
  delta = std::clamp(delta, -0.5, 0.5);
  const double step = table.angles_rad[chosen + 1] - table.angles_rad[chosen];
  result.aoa_rad = table.angles_rad[chosen] + delta * step;
  result.null_value = q0;
  result.valid = true;
  return result;
}

MusicResult music_aoa(const Eigen::MatrixXcd& R, int n_sources, const SteeringTable& table, double predicted_rad) {
  return music_aoa(hermitian_eigendecomposition(R), n_sources, table, predicted_rad);
}

Eigen::MatrixXcd equalized_grid(const Eigen::MatrixXcd& beamformed, const QpskGrid& qpsk) {
  if (beamformed.rows() != qpsk.n_symbols() || beamformed.cols() != qpsk.n_subcarriers())
    throw std::invalid_argument("equalized_grid: grid does not match symbols");
  return beamformed.cwiseQuotient(qpsk.symbols);
}

Eigen::MatrixXcd equalized_grid(const EchoObservation& obs, const Eigen::VectorXcd& w, const QpskGrid& qpsk) {
  return equalized_grid(obs.beamformed(w), qpsk);
}

// ---------------------------------------------------------------------------

namespace {

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : data(fftw_alloc_complex(n)) {
    if (data == nullptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* data;
};

// Planning is not thread-safe in FFTW; executing a finished plan on new
// aligned buffers is.
fftw_plan plan_for(int rows, int cols) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, fftw_plan> plans;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = plans.find({rows, cols});
  if (it != plans.end()) return it->second;
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  FftwBuffer in(n);
  FftwBuffer out(n);
  fftw_plan p = fftw_plan_dft_2d(rows, cols, in.data, out.data, FFTW_FORWARD, FFTW_ESTIMATE);
  if (p == nullptr) throw std::runtime_error("fftw planning failed");
  plans.emplace(std::make_pair(rows, cols), p);
  return p;
}

}  // namespace

DelayDopplerEstimate delay_doppler_estimate(const Eigen::MatrixXcd& r, int oversampling,
                                            double subcarrier_spacing_hz, double symbol_period_s) {
  if (oversampling < 1) throw std::invalid_argument("delay_doppler_estimate: oversampling must be >= 1");
  const int N = static_cast<int>(r.rows());
  const int M = static_cast<int>(r.cols());
  if (N < 1 || M < 1) throw std::invalid_argument("delay_doppler_estimate: empty grid");
  const int SN = oversampling * N;
  const int SM = oversampling * M;
  const std::size_t total = static_cast<std::size_t>(SN) * SM;

  FftwBuffer in(total);
  FftwBuffer out(total);
  std::fill_n(&in.data[0][0], 2 * total, 0.0);
  // conj(r) turns e^{j2pi(n To g - m df tau)} into a forward-transform peak
  // at (k_n, k_m) = (-SN To g, SM df tau).
  for (int n = 0; n < N; ++n)
    for (int m = 0; m < M; ++m) {
      const cd v = r(n, m);
      fftw_complex& dst = in.data[static_cast<std::size_t>(n) * SM + m];
      dst[0] = v.real();
      dst[1] = -v.imag();
    }
  fftw_execute_dft(plan_for(SN, SM), in.data, out.data);

  std::size_t best = 0;
  double best_power = -1.0;
  for (std::size_t i = 0; i < total; ++i) {
    const double p = out.data[i][0] * out.data[i][0] + out.data[i][1] * out.data[i][1];
    if (p > best_power) {
      best_power = p;
      best = i;
    }
  }
  const int k_n = static_cast<int>(best / SM);
  const int k_m = static_cast<int>(best % SM);
  int d = (SN - k_n) % SN;
  if (d >= (SN + 1) / 2) d -= SN;

  DelayDopplerEstimate est;
  est.delay_index = k_m;
  est.doppler_index = d;
  est.tau_hat_s = k_m / (SM * subcarrier_spacing_hz);
  est.gamma_hat_hz = d / (SN * symbol_period_s);
  est.peak_power = best_power;
  est.edge = (k_m == SM - 1) || (SN % 2 == 0 && d == -SN / 2);
  return est;
}

PositionEstimate bistatic_position(double tau_s, double aoa_local_rad, const Vec2& rx, double rx_broadside_rad,
                                   const Vec2& tx) {
  PositionEstimate est;
  est.aoa_est_rad = aoa_local_rad;
  est.tau_est_s = tau_s;
  est.position = Vec2(std::nan(""), std::nan(""));
  const double sum_range = kSpeedOfLight * tau_s;
  const Vec2 baseline_vec = tx - rx;
  const double L = baseline_vec.norm();
  if (!(L > 0.0)) throw GeometryError("bistatic_position: receiver coincides with transmitter");
  if (!(sum_range > L)) return est;
  const double bearing = rx_broadside_rad + aoa_local_rad;
  const Vec2 u(std::cos(bearing), std::sin(bearing));
  const double cos_psi = baseline_vec.dot(u) / L;
  const double denom = sum_range - L * cos_psi;
  if (denom < 1e-6 * sum_range) return est;
  const double d2 = (sum_range * sum_range - L * L) / (2.0 * denom);
  est.position = rx + d2 * u;
  est.valid = true;
  return est;
}

}  // namespace bisense
