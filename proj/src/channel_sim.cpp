#include "bisense/channel_sim.hpp"

#include "bisense/hda_frontend.hpp"

#include <boost/random/normal_distribution.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <random>

namespace bisense {

void fill_complex_gaussian(Eigen::MatrixXcd& out, double variance, Rng& rng) {
  boost::random::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  cd* p = out.data();
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    p[i] = {re, im};
  }
}

Eigen::MatrixXcd sample_complex_wishart(int dim, long dof, double variance, Rng& rng) {
  if (dof < dim) throw std::invalid_argument("sample_complex_wishart: dof must be >= dim");
  boost::random::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    std::gamma_distribution<double> gamma(static_cast<double>(dof - i), 1.0);
    T(i, i) = std::sqrt(gamma(rng));
    for (int j = 0; j < i; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      T(i, j) = {re, im};
    }
  }
  Eigen::MatrixXcd W = variance * (T * T.adjoint());
  return 0.5 * (W + W.adjoint());
}

cd reflection_coefficient(double d1_m, double d2_m, double wavelength_m, double rcs_m2, Rng& rng) {
  if (!(d1_m > 0.0) || !(d2_m > 0.0)) throw std::invalid_argument("reflection_coefficient: distances must be positive");
  const double four_pi = 4.0 * kPi;
  const double mag2 = wavelength_m * wavelength_m * rcs_m2 /
                      (four_pi * four_pi * four_pi * d1_m * d1_m * d2_m * d2_m);
  std::uniform_real_distribution<double> phase(-kPi, kPi);
  return std::polar(std::sqrt(mag2), phase(rng));
}

double bistatic_doppler(const Vec2& velocity, const Vec2& target, const Vec2& tx, const Vec2& rx,
                        double wavelength_m) {
  const Vec2 u_tx = target - tx;
  const Vec2 u_rx = target - rx;
  if (u_tx.norm() <= 0.0 || u_rx.norm() <= 0.0) throw GeometryError("bistatic_doppler: target on a node");
  const double range_rate = velocity.dot(u_tx.normalized()) + velocity.dot(u_rx.normalized());
  return -range_rate / wavelength_m;
}

EchoParams make_echo(const ScenarioConfig& cfg, int rx_index, const Vec2& target, const Vec2& velocity, Rng& rng) {
  const auto& geo = cfg.geometry;
  const Vec2& rx = geo.rx_positions.at(rx_index);
  const BistaticGeometry g =
      bistatic_geometry(geo.tx_position, geo.tx_broadside_rad, rx, geo.rx_broadside_rad[rx_index], target);
  const double lambda = cfg.system.wavelength_m();
  EchoParams e;
  e.h = reflection_coefficient(g.d1_m, g.d2_m, lambda, cfg.system.rcs_m2, rng);
  e.theta_rad = g.tx_aod_rad;
  e.phi_rad = g.rx_local_aoa_rad;
  e.tau_s = g.sum_range_m / kSpeedOfLight;
  e.doppler_hz = bistatic_doppler(velocity, target, geo.tx_position, rx, lambda);
  return e;
}

void check_model_validity(const EchoParams& echo, const SystemParams& params, bool enforce_cyclic_prefix) {
  if (echo.tau_s * params.subcarrier_spacing_hz >= 1.0)
    throw ModelValidityError("echo delay " + std::to_string(echo.tau_s) + " s is ambiguous in the delay periodogram");
  if (enforce_cyclic_prefix && echo.tau_s > params.cyclic_prefix_s)
    throw ModelValidityError("echo delay " + std::to_string(echo.tau_s) + " s exceeds the cyclic prefix");
  if (std::abs(echo.doppler_hz) >= params.subcarrier_spacing_hz / 10.0)
    throw ModelValidityError("Doppler " + std::to_string(echo.doppler_hz) + " Hz not small against subcarrier spacing");
}

namespace {

// c[n, m] = zeta[n, m] e^{j 2 pi (n T_o gamma - m df tau)}
Eigen::MatrixXcd temporal_signature(const EchoParams& echo, const QpskGrid& symbols, const SystemParams& p) {
  const int N = symbols.n_symbols();
  const int M = symbols.n_subcarriers();
  Eigen::VectorXcd doppler(N);
  Eigen::RowVectorXcd delay(M);
  const double To = p.symbol_period_s();
  for (int n = 0; n < N; ++n) doppler[n] = std::polar(1.0, 2.0 * kPi * n * To * echo.doppler_hz);
  for (int m = 0; m < M; ++m) delay[m] = std::polar(1.0, -2.0 * kPi * m * p.subcarrier_spacing_hz * echo.tau_s);
  return symbols.symbols.cwiseProduct(doppler * delay);
}

}  // namespace

RxFrame synthesize_rx_frame(const std::vector<EchoParams>& echoes, const std::vector<QpskGrid>& symbols,
                            const std::vector<Beamformer>& tx_beams, const SystemParams& params,
                            const SynthesisOptions& options, Rng& rng) {
  const std::size_t K = echoes.size();
  if (symbols.size() != K || tx_beams.size() != K)
    throw std::invalid_argument("synthesize_rx_frame: one symbol grid and beam per user required");
  const int N = params.n_symbols;
  const int M = params.n_subcarriers;
  const int Nr = params.n_rx_antennas;
  for (std::size_t k = 0; k < K; ++k) {
    check_model_validity(echoes[k], params, options.enforce_cyclic_prefix);
    if (symbols[k].n_symbols() != N || symbols[k].n_subcarriers() != M)
      throw std::invalid_argument("synthesize_rx_frame: symbol grid does not match N x M");
  }

  RxFrame frame;
  frame.n_symbols = N;
  frame.n_subcarriers = M;
  frame.samples = Eigen::MatrixXcd::Zero(Nr, static_cast<Eigen::Index>(N) * M);
  if (options.add_noise) fill_complex_gaussian(frame.samples, params.noise_variance_w(), rng);

  // Echo of user l carrying stream k: h_l b(phi_l) a(theta_l)^H f_k zeta_k,
  // with the delay/Doppler of the reflecting user l.
  for (std::size_t l = 0; l < K; ++l) {
    const Eigen::VectorXcd b = steering_vector(echoes[l].phi_rad, Nr);
    const Eigen::VectorXcd a = steering_vector(echoes[l].theta_rad, params.n_tx_antennas);
    Eigen::MatrixXcd carried = Eigen::MatrixXcd::Zero(N, M);
    for (std::size_t k = 0; k < K; ++k) {
      if (k != l && !options.cross_gain) continue;
      const cd gain = a.dot(tx_beams[k].weights);
      EchoParams shifted = echoes[l];
      carried += gain * temporal_signature(shifted, symbols[k], params);
    }
    const Eigen::VectorXcd spatial = echoes[l].h * b;
    for (int n = 0; n < N; ++n)
      for (int m = 0; m < M; ++m) frame.samples.col(frame.column(n, m)) += carried(n, m) * spatial;
  }
  return frame;
}

StatisticalObservation synthesize_echo_statistics(const EchoParams& echo, const QpskGrid& symbols,
                                                  const Beamformer& tx_beam, const SystemParams& params,
                                                  const ReductionMatrix* reduction, Rng& rng,
                                                  bool enforce_cyclic_prefix) {
  check_model_validity(echo, params, enforce_cyclic_prefix);
  const int N = symbols.n_symbols();
  const int M = symbols.n_subcarriers();
  const long NM = static_cast<long>(N) * M;
  const double noise_var = params.noise_variance_w();

  const cd tx_gain = steering_vector(echo.theta_rad, params.n_tx_antennas).dot(tx_beam.weights);
  Eigen::VectorXcd spatial = (echo.h * tx_gain) * steering_vector(echo.phi_rad, params.n_rx_antennas);
  if (reduction != nullptr) spatial = reduction->U.adjoint() * spatial;
  const int dim = static_cast<int>(spatial.size());

  StatisticalObservation obs;
  const Eigen::MatrixXcd c = temporal_signature(echo, symbols, params);
  const double c_norm = c.norm();
  obs.signature_ = c / c_norm;

  Eigen::MatrixXcd projected(dim, 1);
  fill_complex_gaussian(projected, noise_var, rng);
  obs.signal_plus_projection_ = spatial * c_norm + projected.col(0);
  obs.wishart_ = sample_complex_wishart(dim, NM - 1, noise_var, rng);
  obs.direction_draw_.resize(N, M);
  fill_complex_gaussian(obs.direction_draw_, 1.0, rng);

  const Eigen::VectorXcd& v = obs.signal_plus_projection_;
  Eigen::MatrixXcd R = (v * v.adjoint() + obs.wishart_) / static_cast<double>(NM);
  obs.covariance_ = 0.5 * (R + R.adjoint());
  return obs;
}

Eigen::MatrixXcd StatisticalObservation::beamformed(const Eigen::VectorXcd& w) const {
  if (used_) throw std::logic_error("StatisticalObservation::beamformed called twice");
  used_ = true;
  if (w.size() != n_channels()) throw std::invalid_argument("beamformed: weight length mismatch");
  const cd coherent = w.dot(signal_plus_projection_);
  const double noise_energy = std::max(0.0, std::real(w.dot(wishart_ * w)));
  // Uniform unit direction orthogonal to the signature.
  Eigen::MatrixXcd u = direction_draw_;
  const cd along = (signature_.conjugate().cwiseProduct(u)).sum();
  u -= along * signature_;
  const double u_norm = u.norm();
  return coherent * signature_ + (std::sqrt(noise_energy) / u_norm) * u;
}

// ---------------------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little, "frame dump assumes a little-endian host");

void put_u32(std::ofstream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
std::uint32_t get_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void write_frame_dump(const RxFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write("BSRF", 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(frame.n_channels()));
  put_u32(out, static_cast<std::uint32_t>(frame.n_symbols));
  put_u32(out, static_cast<std::uint32_t>(frame.n_subcarriers));
  for (int n = 0; n < frame.n_symbols; ++n)
    for (int m = 0; m < frame.n_subcarriers; ++m)
      for (int a = 0; a < frame.n_channels(); ++a) {
        const cd v = frame.samples(a, frame.column(n, m));
        const float parts[2] = {static_cast<float>(v.real()), static_cast<float>(v.imag())};
        out.write(reinterpret_cast<const char*>(parts), sizeof(parts));
      }
}

RxFrame read_frame_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, "BSRF", 4) != 0) throw std::runtime_error("not a frame dump: " + path.string());
  if (get_u32(in) != 1) throw std::runtime_error("unsupported frame dump version");
  const auto nr = static_cast<int>(get_u32(in));
  RxFrame frame;
  frame.n_symbols = static_cast<int>(get_u32(in));
  frame.n_subcarriers = static_cast<int>(get_u32(in));
  frame.samples.resize(nr, static_cast<Eigen::Index>(frame.n_symbols) * frame.n_subcarriers);
  for (int n = 0; n < frame.n_symbols; ++n)
    for (int m = 0; m < frame.n_subcarriers; ++m)
      for (int a = 0; a < nr; ++a) {
        float parts[2];
        in.read(reinterpret_cast<char*>(parts), sizeof(parts));
        frame.samples(a, frame.column(n, m)) = {parts[0], parts[1]};
      }
  if (!in) throw std::runtime_error("truncated frame dump: " + path.string());
  return frame;
}

}  // namespace bisense
