#pragma once

// Circular two-body orbits about a uniformly rotating Earth, ephemeris tables
// with cubic Hermite interpolation, and line-of-sight Doppler prediction.
//
// Time is UTC seconds on the simulation axis. The ECEF and inertial frames
// coincide at t = 0 and differ by a rotation of kEarthRotationRate * t about z;
// polar motion, nutation and light time are ignored.

#include <filesystem>
#include <string>
#include <vector>

#include "leosop/types.hpp"

namespace leosop {

struct OrbitSpec {
  double semi_major_axis_m = 0.0;
  double inclination_rad = 0.0;
  double raan_rad = 0.0;
  double arg_latitude_epoch_rad = 0.0;
  double epoch = 0.0;
  std::string sv_id;

  void validate() const;
  double mean_motion() const;
  double period() const;
};

struct StateVector {
  double t = 0.0;
  Vec3 position_ecef_m = Vec3::Zero();
  Vec3 velocity_ecef_mps = Vec3::Zero();
};

/// Inertial state (same container; the fields hold inertial coordinates).
StateVector propagate_inertial(const OrbitSpec& spec, double t);

/// ECEF state. Velocity is relative to the rotating frame.
StateVector propagate(const OrbitSpec& spec, double t);

Vec3 inertial_to_ecef(const Vec3& r, double t);
Vec3 ecef_to_inertial(const Vec3& r, double t);

/// Doppler shift seen at the receiver, -(f_c / c) (v_sv - v_rx)^T e with e the
/// unit vector from receiver to SV. Positive while approaching.
double predicted_doppler(const StateVector& sv, const Vec3& rx_pos, const Vec3& rx_vel,
                         double carrier_hz);

/// Elevation of `sv_pos` above the local geodetic-ish (spherical) horizon of `rx_pos` [rad].
double elevation(const Vec3& rx_pos, const Vec3& sv_pos);

/// ECEF position on a spherical Earth.
Vec3 geodetic_to_ecef(double lat_rad, double lon_rad, double height_m);

/// Circular orbit whose sub-satellite point passes over `ground_dir_ecef`
/// (any vector pointing at the desired point) at time `t_pass`.
OrbitSpec orbit_through(std::string sv_id, double semi_major_axis_m, double inclination_rad,
                        const Vec3& ground_dir_ecef, double t_pass, bool ascending,
                        double epoch = 0.0);

class EphemerisTable {
 public:
  EphemerisTable() = default;
  /// Throws ConfigError unless times are strictly increasing and >= 2 samples.
  EphemerisTable(std::string sv_id, std::vector<StateVector> samples);

  /// Samples `propagate(spec, t)` on [t0, t1] at `step` (t1 always included).
  static EphemerisTable sample(const OrbitSpec& spec, double t0, double t1, double step);

  /// CSV with header `t,x,y,z,vx,vy,vz`.
  static EphemerisTable import_csv(const std::filesystem::path& path, std::string sv_id);
  void export_csv(const std::filesystem::path& path) const;

  /// Cubic Hermite interpolation using stored velocities; exact at nodes.
  /// Throws ConfigError when t lies outside [front().t, back().t].
  StateVector interpolate(double t) const;

  bool covers(double t) const;
  const std::string& sv_id() const { return sv_id_; }
  const std::vector<StateVector>& samples() const { return samples_; }
  double t_begin() const { return samples_.front().t; }
  double t_end() const { return samples_.back().t; }

 private:
  std::string sv_id_;
  std::vector<StateVector> samples_;
};

}  // namespace leosop
