#include "bisense/simulation.hpp"

#include "bisense/error_model.hpp"
#include "bisense/fusion_tracker.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace bisense {

namespace {
const double kNaN = std::numeric_limits<double>::quiet_NaN();
}

Mode Mode::parse(const std::string& name) {
  Mode m;
  if (name == "fuse") {
    m.kind = Kind::fuse;
  } else if (name == "oracle") {
    m.kind = Kind::oracle;
  } else if (name.size() > 2 && name.compare(0, 2, "rx") == 0 &&
             name.find_first_not_of("0123456789", 2) == std::string::npos) {
    m.kind = Kind::single;
    m.receiver = std::stoi(name.substr(2));
  } else {
    throw std::invalid_argument("unknown mode '" + name + "'");
  }
  return m;
}

std::string Mode::name() const {
  switch (kind) {
    case Kind::single: return "rx" + std::to_string(receiver);
    case Kind::fuse: return "fuse";
    case Kind::oracle: return "oracle";
  }
  return "";
}

std::uint32_t Mode::seed_code() const {
  switch (kind) {
    case Kind::single: return static_cast<std::uint32_t>(receiver);
    case Kind::fuse: return 100;
    case Kind::oracle: return 200;
  }
  return 0;
}

Rng make_run_rng(std::uint64_t master_seed, int run_id, const Mode& mode, double pt_dbm) {
  const auto milli_dbm = static_cast<std::int64_t>(std::llround(pt_dbm * 1000.0));
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed & 0xffffffffu), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(run_id), mode.seed_code(),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(milli_dbm) & 0xffffffffu)};
  return Rng(seq);
}

Simulator::Simulator(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.system.validate();
  cfg_.geometry.validate();
  cfg_.trajectory.validate();
  waypoints_ = sample_waypoints(cfg_.trajectory, cfg_.system.refresh_period_s);
  table_ = std::make_shared<const SteeringTable>(
      make_steering_table(make_angle_grid(deg2rad(cfg_.estimator.music_step_deg)), cfg_.system.n_rx_antennas));
}

ReceiverOutcome Simulator::process_receiver(const SystemParams& params, int rx_index, const WaypointState& truth,
                                            double tx_beam_rad, const QpskGrid& qpsk, const Vec2& predicted_position,
                                            Rng& rng) const {
  const auto& geo = cfg_.geometry;
  const Vec2& rx = geo.rx_positions.at(rx_index);
  const double broadside = geo.rx_broadside_rad.at(rx_index);
  const int K = params.n_users;
  const int Nr = params.n_rx_antennas;

  ReceiverOutcome out;
  out.attempted = true;
  out.estimate.receiver_index = rx_index;
  out.estimate.position = Vec2(kNaN, kNaN);
  out.estimate.gdop = kNaN;
  out.gdop_actual = kNaN;

  const EchoParams echo = make_echo(cfg_, rx_index, truth.position, truth.velocity, rng);
  try {
    check_model_validity(echo, params, cfg_.estimator.enforce_cyclic_prefix);
  } catch (const ModelValidityError&) {
    return out;
  }

  const Vec2 to_pred = predicted_position - rx;
  const double predicted_aoa = ula_local_angle(std::atan2(to_pred.y(), to_pred.x()), broadside);

  std::optional<ReductionMatrix> reduction;
  if (cfg_.receiver.architecture == Architecture::hda) {
    reduction = cfg_.receiver.identity_reduction
                    ? ReductionMatrix::identity(Nr)
                    : build_reduction(predicted_aoa, Nr, cfg_.receiver.n_rf, cfg_.receiver.thbw);
  }
  const ReductionMatrix* red = reduction ? &*reduction : nullptr;
  const Beamformer tx_beam = make_beamformer(tx_beam_rad, params.n_tx_antennas, BeamKind::transmit);

  std::unique_ptr<EchoObservation> obs;
  if (cfg_.estimator.fast_statistics) {
    obs = std::make_unique<StatisticalObservation>(synthesize_echo_statistics(echo, qpsk, tx_beam, params, red, rng,
                                                                             cfg_.estimator.enforce_cyclic_prefix));
  } else {
    SynthesisOptions opts;
    opts.cross_gain = cfg_.estimator.cross_gain_model;
    opts.enforce_cyclic_prefix = cfg_.estimator.enforce_cyclic_prefix;
    RxFrame frame = synthesize_rx_frame({echo}, {qpsk}, {tx_beam}, params, opts, rng);
    if (red != nullptr) frame = reduce_frame(frame, *red);
    obs = std::make_unique<FrameObservation>(std::move(frame));
  }

  const EigenDecomposition eig = hermitian_eigendecomposition(obs->covariance());
  std::optional<SteeringTable> reduced_table;
  if (red != nullptr) reduced_table = reduce_steering_table(*table_, *red);
  const SteeringTable& table = reduced_table ? *reduced_table : *table_;
  const MusicResult music = music_aoa(eig, K, table, predicted_aoa);
  if (!music.valid) return out;

  auto effective_steering = [&](double angle) {
    const Eigen::VectorXcd b = steering_vector(angle, Nr);
    return red != nullptr ? Eigen::VectorXcd(red->U.adjoint() * b) : b;
  };
  const Eigen::VectorXcd b_est = effective_steering(music.aoa_rad);
  const Eigen::VectorXcd w = b_est / b_est.norm();
  const Eigen::MatrixXcd r = equalized_grid(*obs, w, qpsk);

  const DelayDopplerEstimate dd =
      delay_doppler_estimate(r, params.fft_oversampling, params.subcarrier_spacing_hz, params.symbol_period_s());
  if (dd.edge) return out;

  PositionEstimate est = bistatic_position(dd.tau_hat_s, music.aoa_rad, rx, broadside, geo.tx_position);
  est.receiver_index = rx_index;
  est.doppler_est_hz = dd.gamma_hat_hz;
  est.gdop = kNaN;
  if (!est.valid) {
    out.estimate = est;
    return out;
  }

  const int n_eff = red != nullptr ? red->n_rf() : Nr;
  auto c_phi_for = [&](double rho0) {
    double c = crlb_aoa(rho0, params.n_symbols, params.n_subcarriers, n_eff);
    if (cfg_.estimator.cphi_cos2_correction) c /= std::pow(std::cos(music.aoa_rad), 2);
    return c;
  };
  auto c_tau_for = [&](double rho1) {
    return crlb_delay(rho1, params.fft_oversampling, params.n_subcarriers, params.subcarrier_spacing_hz,
                      params.n_symbols, params.symbol_period_s());
  };

  const Eigen::Matrix2d J = measurement_jacobian(est.position, geo.tx_position, rx);
  const SnrEstimates snr = estimate_snrs(eig.values, K, Nr, r, params.tx_power_w, K);
  const double c_tau = c_tau_for(snr.rho1_est);
  const double c_phi = c_phi_for(snr.rho0_est);
  if (!(c_tau > 0.0) || !(c_phi > 0.0) || !std::isfinite(c_tau) || !std::isfinite(c_phi)) {
    est.valid = false;
    out.estimate = est;
    return out;
  }
  const PositionCovariance cov = position_covariance(J, c_tau, c_phi);

  const double tx_gain = beam_gain(echo.theta_rad, tx_beam);
  const double rho0_act = params.tx_power_w * std::norm(echo.h) * tx_gain / (K * params.noise_variance_w());
  const double rho1_act = std::norm(w.dot(effective_steering(echo.phi_rad))) * rho0_act;
  const bool act_defined = rho0_act > 0.0 && rho1_act > 0.0;
  const PositionCovariance cov_act =
      act_defined ? position_covariance(J, c_tau_for(rho1_act), c_phi_for(rho0_act)) : PositionCovariance{};

  est.covariance = cov.sigma;
  est.gdop = cov.bounded ? cov.gdop : std::numeric_limits<double>::infinity();
  est.valid = cov.bounded;
  out.estimate = est;
  out.gdop_actual = !act_defined ? kNaN : cov_act.bounded ? cov_act.gdop : std::numeric_limits<double>::infinity();
  return out;
}

RunResult Simulator::run(const Mode& mode, double pt_dbm, int run_id) const {
  const int n_rx = static_cast<int>(cfg_.geometry.n_receivers());
  if (mode.kind == Mode::Kind::single && (mode.receiver < 0 || mode.receiver >= n_rx))
    throw std::invalid_argument("mode " + mode.name() + " names a missing receiver");

  SystemParams params = cfg_.system;
  params.tx_power_w = dbm_to_watts(pt_dbm);
  const auto& geo = cfg_.geometry;
  Rng rng = make_run_rng(cfg_.master_seed, run_id, mode, pt_dbm);

  std::vector<int> receivers;
  if (mode.kind == Mode::Kind::single) receivers.push_back(mode.receiver);
  if (mode.kind == Mode::Kind::fuse)
    for (int i = 0; i < n_rx; ++i) receivers.push_back(i);
  const int n_select = mode.kind == Mode::Kind::single ? 1 : params.n_select;

  Tracker tracker(waypoints_.front().position, geo.tx_position, geo.tx_broadside_rad, params.gate_radius_m, n_select);
  RunResult result;
  result.records.reserve(waypoints_.size());

  for (const WaypointState& truth : waypoints_) {
    EpochRecord rec;
    rec.run_id = run_id;
    rec.epoch = truth.epoch;
    rec.pt_dbm = pt_dbm;
    rec.mode = mode.name();
    rec.x_true = truth.position.x();
    rec.y_true = truth.position.y();
    const double theta_true = predicted_aod(truth.position, geo.tx_position, geo.tx_broadside_rad);
    rec.theta_true_deg = rad2deg(theta_true);
    rec.x_fused = kNaN;
    rec.y_fused = kNaN;
    rec.rx.assign(n_rx, ReceiverRecord{kNaN, kNaN, false, kNaN, kNaN, false});

    const bool alive = mode.kind == Mode::Kind::oracle || tracker.state().alive;
    if (!alive) {
      rec.theta_pred_deg = kNaN;
      rec.se_bps_hz = 0.0;
      rec.pae_deg = kNaN;
      result.records.push_back(std::move(rec));
      continue;
    }

    const double theta_hat = mode.kind == Mode::Kind::oracle ? theta_true : tracker.state().predicted_aod_rad;
    const double d1 = (truth.position - geo.tx_position).norm();
    rec.theta_pred_deg = rad2deg(theta_hat);
    rec.se_bps_hz = spectral_efficiency(theta_true, theta_hat, d1, params);
    rec.pae_deg = predicted_aod_error_deg(theta_true, theta_hat);

    if (mode.kind == Mode::Kind::oracle) {
      rec.x_fused = truth.position.x();
      rec.y_fused = truth.position.y();
      result.records.push_back(std::move(rec));
      continue;
    }

    const Vec2 predicted = tracker.state().predicted;
    const QpskGrid qpsk =
        generate_qpsk_grid(params.n_symbols, params.n_subcarriers, params.tx_power_w / params.n_users, rng);
    std::vector<PositionEstimate> estimates;
    for (int i : receivers) {
      const ReceiverOutcome o = process_receiver(params, i, truth, theta_hat, qpsk, predicted, rng);
      ReceiverRecord& rr = rec.rx[i];
      rr.x = o.estimate.position.x();
      rr.y = o.estimate.position.y();
      rr.gdop_est = o.estimate.gdop;
      rr.gdop_act = o.gdop_actual;
      estimates.push_back(o.estimate);
    }

    if (truth.epoch == 0) {
      // Acquisition epoch: measurements are logged, the track starts at truth.
      for (std::size_t k = 0; k < estimates.size(); ++k)
        rec.rx[receivers[k]].valid = gate_validate(estimates[k], predicted, params.gate_radius_m);
      rec.x_fused = tracker.state().history[0].x();
      rec.y_fused = tracker.state().history[0].y();
    } else {
      const StepResult step = tracker.step(estimates);
      for (std::size_t k = 0; k < estimates.size(); ++k) rec.rx[receivers[k]].valid = step.gated[k];
      for (int i : step.selected) rec.rx[i].selected = true;
      rec.x_fused = step.position.x();
      rec.y_fused = step.position.y();
      if (!tracker.state().alive) result.death_epoch = truth.epoch;
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

}  // namespace bisense
