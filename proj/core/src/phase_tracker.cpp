#include "leosop/phase_tracker.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "leosop/constants.hpp"
#include "leosop/errors.hpp"

namespace leosop {

void KFConfig::validate() const {
  if (!(frame_period_s > 0.0)) throw ConfigError("KF: frame period must be > 0");
  if (!(q_w >= 0.0)) throw ConfigError("KF: q_w must be >= 0");
  if (!(R > 0.0)) throw ConfigError("KF: R must be > 0");
  if (!x0.allFinite() || !sigma0.allFinite() || (sigma0.array() < 0.0).any())
    throw ConfigError("KF: initial state must be finite with non-negative sigmas");
}

TrackState KFConfig::initial_state() const {
  TrackState s;
  s.x = x0;
  s.P = sigma0.array().square().matrix().asDiagonal();
  s.k = 0;
  return s;
}

Eigen::Matrix3d transition_matrix(double T) {
  Eigen::Matrix3d F;
  F << 1.0, T, 0.5 * T * T,
       0.0, 1.0, T,
       0.0, 0.0, 1.0;
  return F;
}

Eigen::Matrix3d process_noise(double T, double q_w) {
  const double T2 = T * T;
  const double T3 = T2 * T;
  const double T4 = T3 * T;
  const double T5 = T4 * T;
  Eigen::Matrix3d Q;
  Q << T5 / 20.0, T4 / 8.0, T3 / 6.0,
       T4 / 8.0,  T3 / 3.0, T2 / 2.0,
       T3 / 6.0,  T2 / 2.0, T;
  return q_w * Q;
}

TrackState predict(const TrackState& state, const KFConfig& cfg) {
  const Eigen::Matrix3d F = transition_matrix(cfg.frame_period_s);
  TrackState out;
  out.x = F * state.x;
  const Eigen::Matrix3d P = F * state.P * F.transpose() + process_noise(cfg.frame_period_s, cfg.q_w);
  out.P = 0.5 * (P + P.transpose());
  out.k = state.k + 1;
  return out;
}

ComplexVector wipe_off(std::span<const Complex> frame, const TrackState& a_priori,
                       double sample_period_s) {
  ComplexVector out(frame.size());
  const double theta = a_priori.x[0];
  const double w = a_priori.x[1];
  const double wdot = a_priori.x[2];
  for (std::size_t n = 0; n < frame.size(); ++n) {
    const double t = static_cast<double>(n) * sample_period_s;
    out[n] = frame[n] * std::polar(1.0, -(theta + w * t + 0.5 * wdot * t * t));
  }
  return out;
}

UpdateResult update_detailed(const TrackState& a_priori, double delta_f_hz, const KFConfig& cfg) {
  if (!std::isfinite(delta_f_hz)) throw ConfigError("KF update: non-finite Doppler residual");
  const Eigen::RowVector3d H(0.0, 1.0, 0.0);
  const Eigen::Matrix3d& P = a_priori.P;
  const double innovation = kTwoPi * delta_f_hz;
  const double S = (H * P * H.transpose())(0, 0) + cfg.R;
  const Eigen::Vector3d K = P * H.transpose() / S;
  const Eigen::Matrix3d I_KH = Eigen::Matrix3d::Identity() - K * H;

  UpdateResult r;
  r.state.x = a_priori.x + K * innovation;
  const Eigen::Matrix3d Pn = I_KH * P * I_KH.transpose() + K * cfg.R * K.transpose();
  r.state.P = 0.5 * (Pn + Pn.transpose());
  r.state.k = a_priori.k;
  r.innovation = innovation;
  r.innovation_variance = S;
  return r;
}

TrackState update(const TrackState& a_priori, double delta_f_hz, const KFConfig& cfg) {
  return update_detailed(a_priori, delta_f_hz, cfg).state;
}

double min_eigenvalue(const Eigen::Matrix3d& P) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(0.5 * (P + P.transpose()),
                                                        Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

}  // namespace leosop
