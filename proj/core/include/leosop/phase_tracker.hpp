#pragma once

// Kalman filter over the carrier-phase triple x = [theta, theta_dot, theta_ddot]
// (rad, rad/s, rad/s^2) advanced once per frame. The only observation is the
// residual Doppler of the wiped-off frame, z = H x with H = [0 1 0].

#include <cstdint>
#include <span>

#include <Eigen/Core>

#include "leosop/types.hpp"

namespace leosop {

struct TrackState {
  Eigen::Vector3d x = Eigen::Vector3d::Zero();
  Eigen::Matrix3d P = Eigen::Matrix3d::Zero();
  std::int64_t k = 0;
};

struct KFConfig {
  double frame_period_s = 1.0 / 750.0;
  /// Jerk spectral density [rad^2/s^5].
  double q_w = 1e-28;
  /// Doppler measurement variance [rad^2/s^2].
  double R = 70.0;
  Eigen::Vector3d x0 = Eigen::Vector3d::Zero();
  /// Initial standard deviations (theta, theta_dot, theta_ddot).
  Eigen::Vector3d sigma0{0.0, 40.0 * 3.14159265358979323846, 8000.0 * 3.14159265358979323846};

  void validate() const;
  TrackState initial_state() const;
};

Eigen::Matrix3d transition_matrix(double T);
/// Q = q_w [[T^5/20, T^4/8, T^3/6], [T^4/8, T^3/3, T^2/2], [T^3/6, T^2/2, T]].
Eigen::Matrix3d process_noise(double T, double q_w);

/// A priori state for the next frame.
TrackState predict(const TrackState& state, const KFConfig& cfg);

/// r[n] * exp(-j (theta + theta_dot n Ts + theta_ddot (n Ts)^2 / 2)).
ComplexVector wipe_off(std::span<const Complex> frame, const TrackState& a_priori,
                       double sample_period_s);

struct UpdateResult {
  TrackState state;
  double innovation = 0.0;           // rad/s
  double innovation_variance = 0.0;  // H P H^T + R
};

/// Scalar update with innovation 2 pi delta_f; Joseph-form covariance.
/// Throws ConfigError on non-finite delta_f.
UpdateResult update_detailed(const TrackState& a_priori, double delta_f_hz, const KFConfig& cfg);
TrackState update(const TrackState& a_priori, double delta_f_hz, const KFConfig& cfg);

/// Smallest eigenvalue of the symmetric part of P.
double min_eigenvalue(const Eigen::Matrix3d& P);

}  // namespace leosop
