#include "leosop/orbit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "leosop/constants.hpp"
#include "leosop/csv.hpp"
#include "leosop/errors.hpp"

namespace leosop {
namespace {

Eigen::Matrix3d rot_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix3d m;
  m << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return m;
}

struct PlaneBasis {
  Vec3 p;
  Vec3 q;
};

PlaneBasis plane_basis(double raan, double incl) {
  const double co = std::cos(raan);
  const double so = std::sin(raan);
  const double ci = std::cos(incl);
  const double si = std::sin(incl);
  return {Vec3(co, so, 0.0), Vec3(-ci * so, ci * co, si)};
}

}  // namespace

void OrbitSpec::validate() const {
  if (!(semi_major_axis_m > kEarthRadius))
    throw ConfigError("orbit " + sv_id + ": semi-major axis must exceed the Earth radius");
  if (!std::isfinite(inclination_rad) || !std::isfinite(raan_rad) ||
      !std::isfinite(arg_latitude_epoch_rad) || !std::isfinite(epoch))
    throw ConfigError("orbit " + sv_id + ": non-finite element");
}

double OrbitSpec::mean_motion() const {
  return std::sqrt(kEarthMu / (semi_major_axis_m * semi_major_axis_m * semi_major_axis_m));
}

double OrbitSpec::period() const { return kTwoPi / mean_motion(); }

Vec3 inertial_to_ecef(const Vec3& r, double t) {
  return rot_z(-kEarthRotationRate * t) * r;
}

Vec3 ecef_to_inertial(const Vec3& r, double t) { return rot_z(kEarthRotationRate * t) * r; }

StateVector propagate_inertial(const OrbitSpec& spec, double t) {
  spec.validate();
  if (!std::isfinite(t)) throw ConfigError("propagate: non-finite time");
  const double n = spec.mean_motion();
  const double u = spec.arg_latitude_epoch_rad + n * (t - spec.epoch);
  const auto [p, q] = plane_basis(spec.raan_rad, spec.inclination_rad);
  const double a = spec.semi_major_axis_m;
  StateVector s;
  s.t = t;
  s.position_ecef_m = a * (std::cos(u) * p + std::sin(u) * q);
  s.velocity_ecef_mps = a * n * (-std::sin(u) * p + std::cos(u) * q);
  return s;
}

StateVector propagate(const OrbitSpec& spec, double t) {
  const StateVector in = propagate_inertial(spec, t);
  const Vec3 omega(0.0, 0.0, kEarthRotationRate);
  const Eigen::Matrix3d rot = rot_z(-kEarthRotationRate * t);
  StateVector s;
  s.t = t;
  s.position_ecef_m = rot * in.position_ecef_m;
  s.velocity_ecef_mps = rot * (in.velocity_ecef_mps - omega.cross(in.position_ecef_m));
  return s;
}

double predicted_doppler(const StateVector& sv, const Vec3& rx_pos, const Vec3& rx_vel,
                         double carrier_hz) {
  const Vec3 los = sv.position_ecef_m - rx_pos;
  const double range = los.norm();
  if (!(range > 0.0)) throw GeometryError("predicted_doppler: receiver and SV coincide");
  const double range_rate = (sv.velocity_ecef_mps - rx_vel).dot(los / range);
  return -carrier_hz / kSpeedOfLight * range_rate;
}

double elevation(const Vec3& rx_pos, const Vec3& sv_pos) {
  const Vec3 up = rx_pos.normalized();
  const Vec3 los = (sv_pos - rx_pos).normalized();
  return std::asin(std::clamp(up.dot(los), -1.0, 1.0));
}

Vec3 geodetic_to_ecef(double lat_rad, double lon_rad, double height_m) {
  const double r = kEarthRadius + height_m;
  return Vec3(r * std::cos(lat_rad) * std::cos(lon_rad), r * std::cos(lat_rad) * std::sin(lon_rad),
              r * std::sin(lat_rad));
}

OrbitSpec orbit_through(std::string sv_id, double semi_major_axis_m, double inclination_rad,
                        const Vec3& ground_dir_ecef, double t_pass, bool ascending,
                        double epoch) {
  const Vec3 d = ecef_to_inertial(ground_dir_ecef.normalized(), t_pass);
  const double si = std::sin(inclination_rad);
  if (std::abs(si) < 1e-12 || std::abs(d.z()) > std::abs(si))
    throw ConfigError("orbit_through: point latitude exceeds orbit inclination");
  double u = std::asin(std::clamp(d.z() / si, -1.0, 1.0));
  if (!ascending) u = kPi - u;
  // x = cos(u) cosO - sin(u) cos(i) sinO ; y = cos(u) sinO + sin(u) cos(i) cosO
  const double raan =
      std::atan2(d.y(), d.x()) - std::atan2(std::sin(u) * std::cos(inclination_rad), std::cos(u));
  OrbitSpec spec;
  spec.sv_id = std::move(sv_id);
  spec.semi_major_axis_m = semi_major_axis_m;
  spec.inclination_rad = inclination_rad;
  spec.raan_rad = std::remainder(raan, kTwoPi);
  spec.epoch = epoch;
  spec.arg_latitude_epoch_rad = std::remainder(u - spec.mean_motion() * (t_pass - epoch), kTwoPi);
  spec.validate();
  return spec;
}

EphemerisTable::EphemerisTable(std::string sv_id, std::vector<StateVector> samples)
    : sv_id_(std::move(sv_id)), samples_(std::move(samples)) {
  if (samples_.size() < 2)
    throw ConfigError("ephemeris " + sv_id_ + ": at least two samples required");
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (!(samples_[i].t > samples_[i - 1].t))
      throw ConfigError("ephemeris " + sv_id_ + ": times not strictly increasing at row " +
                        std::to_string(i + 1));
  }
}

EphemerisTable EphemerisTable::sample(const OrbitSpec& spec, double t0, double t1, double step) {
  if (!(step > 0.0) || !(t1 > t0)) throw ConfigError("ephemeris sampling: bad span or step");
  std::vector<StateVector> out;
  const auto n = static_cast<std::size_t>(std::floor((t1 - t0) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(propagate(spec, t0 + step * static_cast<double>(i)));
  if (out.back().t < t1 - 1e-9) out.push_back(propagate(spec, t1));
  return EphemerisTable(spec.sv_id, std::move(out));
}

EphemerisTable EphemerisTable::import_csv(const std::filesystem::path& path, std::string sv_id) {
  const CsvTable table = read_csv(path);
  const std::vector<std::string> expected{"t", "x", "y", "z", "vx", "vy", "vz"};
  if (table.header != expected)
    throw ConfigError("ephemeris " + path.string() + ": expected header t,x,y,z,vx,vy,vz");
  std::vector<StateVector> samples;
  samples.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    StateVector s;
    s.t = parse_double(row[0], path, r + 2);
    for (int i = 0; i < 3; ++i) {
      s.position_ecef_m[i] = parse_double(row[1 + i], path, r + 2);
      s.velocity_ecef_mps[i] = parse_double(row[4 + i], path, r + 2);
    }
    samples.push_back(s);
  }
  return EphemerisTable(std::move(sv_id), std::move(samples));
}

void EphemerisTable::export_csv(const std::filesystem::path& path) const {
  CsvWriter out(path, {"t", "x", "y", "z", "vx", "vy", "vz"});
  for (const auto& s : samples_) {
    out.row(s.t, s.position_ecef_m.x(), s.position_ecef_m.y(), s.position_ecef_m.z(),
            s.velocity_ecef_mps.x(), s.velocity_ecef_mps.y(), s.velocity_ecef_mps.z());
  }
}

bool EphemerisTable::covers(double t) const {
  return !samples_.empty() && t >= t_begin() && t <= t_end();
}

StateVector EphemerisTable::interpolate(double t) const {
  if (!covers(t))
    throw ConfigError("ephemeris " + sv_id_ + ": t = " + std::to_string(t) +
                      " outside table span");
  auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                             [](double v, const StateVector& s) { return v < s.t; });
  if (it == samples_.end()) return samples_.back();
  const StateVector& b = *it;
  const StateVector& a = *(it - 1);
  if (t == a.t) return a;
  const double h = b.t - a.t;
  const double s = (t - a.t) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  const double d00 = (6 * s2 - 6 * s) / h;
  const double d10 = 3 * s2 - 4 * s + 1;
  const double d01 = (-6 * s2 + 6 * s) / h;
  const double d11 = 3 * s2 - 2 * s;
  StateVector out;
  out.t = t;
  out.position_ecef_m = h00 * a.position_ecef_m + h10 * h * a.velocity_ecef_mps +
                        h01 * b.position_ecef_m + h11 * h * b.velocity_ecef_mps;
  out.velocity_ecef_mps = d00 * a.position_ecef_m + d10 * a.velocity_ecef_mps +
                          d01 * b.position_ecef_m + d11 * b.velocity_ecef_mps;
  return out;
}

}  // namespace leosop
