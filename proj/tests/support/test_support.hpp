#pragma once

// Shared scenario builders and independent reference implementations.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "leosop/constants.hpp"
#include "leosop/orbit.hpp"
#include "leosop/scenario.hpp"
#include "leosop/types.hpp"

namespace leosop::testing {

inline ComplexVector random_signal(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  ComplexVector x(n);
  for (auto& v : x) v = {g(rng), g(rng)};
  return x;
}

inline double relative_error(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

inline Vec3 demo_receiver() { return geodetic_to_ecef(45.07 * kPi / 180.0, 7.69 * kPi / 180.0, 250.0); }

struct LocalFrame {
  Vec3 east, north, up;
};

inline LocalFrame local_frame(const Vec3& p) {
  LocalFrame f;
  f.up = p.normalized();
  f.east = Vec3::UnitZ().cross(f.up).normalized();
  f.north = f.up.cross(f.east);
  return f;
}

/// Four 550 km passes spread over 600 s around `rx`.
inline std::vector<OrbitSpec> four_passes(const Vec3& rx) {
  const LocalFrame lf = local_frame(rx);
  struct P {
    const char* id;
    double incl_deg, east_km, north_km, t;
    bool ascending;
  };
  const P passes[] = {{"SV1", 53.0, 400, 0, 60, true},
                      {"SV2", 97.6, -300, 0, 210, false},
                      {"SV3", 70.0, 0, 450, 360, true},
                      {"SV4", 43.0, -150, -350, 510, false}};
  std::vector<OrbitSpec> out;
  for (const auto& p : passes)
    out.push_back(orbit_through(p.id, kEarthRadius + 550e3, p.incl_deg * kPi / 180.0,
                                rx + lf.east * p.east_km * 1e3 + lf.north * p.north_km * 1e3, p.t,
                                p.ascending));
  return out;
}

inline std::vector<EphemerisTable> sample_ephemerides(const std::vector<OrbitSpec>& orbits, double t0,
                                                      double t1, double step = 10.0) {
  std::vector<EphemerisTable> out;
  for (const auto& o : orbits) out.push_back(EphemerisTable::sample(o, t0, t1, step));
  return out;
}

/// Textbook Kalman filter for the constant-jerk phase model, written from
/// scratch with the standard (non-Joseph) covariance update.
struct TextbookKF {
  static Eigen::Matrix3d F(double T) {
    Eigen::Matrix3d f;
    f << 1, T, T * T / 2, 0, 1, T, 0, 0, 1;
    return f;
  }
  static Eigen::Matrix3d Q(double T, double q) {
    Eigen::Matrix3d m;
    m << std::pow(T, 5) / 20, std::pow(T, 4) / 8, std::pow(T, 3) / 6, std::pow(T, 4) / 8,
        std::pow(T, 3) / 3, T * T / 2, std::pow(T, 3) / 6, T * T / 2, T;
    return q * m;
  }
  /// Innovation is the measured frequency error itself: z - Hx = 2 pi df.
  static void update(Eigen::Vector3d& x, Eigen::Matrix3d& P, double df_hz, double R) {
    const Eigen::RowVector3d H(0, 1, 0);
    const double S = (H * P * H.transpose())(0, 0) + R;
    const Eigen::Vector3d K = P * H.transpose() / S;
    x = x + K * (2.0 * kPi * df_hz);
    P = (Eigen::Matrix3d::Identity() - K * H) * P;
    P = 0.5 * (P + P.transpose()).eval();
  }
};

/// Unique scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto p = std::filesystem::temp_directory_path() / ("leosop_" + tag + "_" + std::to_string(rng() % 1000000007));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace leosop::testing
