#pragma once

// Doppler-only positioning: Gauss-Newton least squares on range-rate
// observations with percentile post-fit refinement.
//
// Model: rdot = (v_sv - v)^T e + c * clock_drift, e = (p_sv - p) / |p_sv - p|.
// Doppler converts as rdot = -(c / f_c) f_d. Clock bias is carried but never
// estimated (it does not enter the range-rate model).

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "leosop/acquisition.hpp"
#include "leosop/constants.hpp"
#include "leosop/orbit.hpp"

namespace leosop {

struct PVTState {
  Vec3 p = Vec3::Zero();
  double delta_t = 0.0;
  Vec3 v = Vec3::Zero();
  double delta_t_dot = 0.0;
};

enum class NavMode { static_rx, full };

struct NavConfig {
  /// Threshold on ||ds|| with positions in m, velocities in m/s and the
  /// drift as c * delta_t_dot in m/s.
  double epsilon = 1e-3;
  int max_iters = 20;
  NavMode mode = NavMode::static_rx;
  /// Fraction of measurements kept by postfit_refine.
  double lambda = 1.0;
  /// Largest tolerated condition number of the column-scaled Jacobian.
  double max_condition = 1e10;

  void validate() const;
  int unknowns() const { return mode == NavMode::static_rx ? 4 : 7; }
};

struct RangeRateObservation {
  StateVector sv;
  double range_rate_mps = 0.0;
  std::string sv_id;
  double t = 0.0;
};

struct ResidualReport {
  /// Post-fit residual per input measurement [m/s] (measured - modeled).
  std::vector<double> residuals;
  std::vector<bool> kept;
  int iterations = 0;
  double final_step_norm = 0.0;
  bool converged = false;
  /// ||residual|| after each iteration's update.
  std::vector<double> residual_norm_history;
};

struct NavSolution {
  PVTState state;
  ResidualReport report;
};

double range_rate_model(const StateVector& sv, const PVTState& s);

/// Row [d/dp (3), d/dv (3), d/d(c delta_t_dot)].
Eigen::Matrix<double, 1, 7> range_rate_jacobian(const StateVector& sv, const PVTState& s);

/// Assigned measurements become observations with SV states interpolated at
/// `t + time_offset_s`; unassigned ones are skipped. Throws ConfigError when
/// an SV has no ephemeris or the epoch falls outside it.
std::vector<RangeRateObservation> make_observations(const std::vector<DopplerMeasurement>& meas,
                                                    const std::vector<EphemerisTable>& ephemerides,
                                                    double carrier_hz, double time_offset_s = 0.0);

/// Throws GeometryError for too few observations or a rank-deficient Jacobian
/// (the message names the weak state directions). Non-convergence is
/// reported through report.converged.
NavSolution solve_ls(const std::vector<RangeRateObservation>& obs, const PVTState& s0,
                     const NavConfig& cfg);
NavSolution solve_ls(const std::vector<DopplerMeasurement>& meas,
                     const std::vector<EphemerisTable>& ephemerides, const PVTState& s0,
                     const NavConfig& cfg, double carrier_hz, double time_offset_s = 0.0);

/// Keeps the cfg.lambda fraction with the smallest |post-fit residual| and
/// re-solves from `solution`. Throws GeometryError when too few remain.
NavSolution postfit_refine(const std::vector<RangeRateObservation>& obs,
                           const NavSolution& solution, const NavConfig& cfg);

/// Kept count for a fraction: round(lambda * n), at least 1.
std::size_t kept_count(double lambda, std::size_t n);

struct LambdaPoint {
  double lambda = 0.0;
  double pos_error_m = 0.0;
};

std::vector<LambdaPoint> lambda_sweep(const std::vector<RangeRateObservation>& obs,
                                      const NavSolution& initial, const NavConfig& cfg,
                                      const std::vector<double>& lambdas, const Vec3& truth);

/// `lambda,pos_error_m`
void write_lambda_sweep_csv(const std::filesystem::path& path, const std::vector<LambdaPoint>& pts);
/// `t,sv_id,residual_mps,kept`
void write_residuals_csv(const std::filesystem::path& path,
                         const std::vector<RangeRateObservation>& obs, const ResidualReport& report);
/// Plain-text solution summary.
std::string solution_report(const NavSolution& sol, const NavConfig& cfg,
                            const Vec3* truth = nullptr);

inline double doppler_to_range_rate(double f_d_hz, double carrier_hz) {
  return -kSpeedOfLight / carrier_hz * f_d_hz;
}
inline double range_rate_to_doppler(double rdot_mps, double carrier_hz) {
  return -carrier_hz / kSpeedOfLight * rdot_mps;
}

}  // namespace leosop
