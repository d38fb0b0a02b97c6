#pragma once

#include <numbers>

namespace leosop {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Earth gravitational parameter [m^3/s^2].
inline constexpr double kEarthMu = 3.986004418e14;
/// Earth rotation rate [rad/s].
inline constexpr double kEarthRotationRate = 7.2921150e-5;
/// Equatorial Earth radius [m].
inline constexpr double kEarthRadius = 6378137.0;
/// Speed of light [m/s].
inline constexpr double kSpeedOfLight = 299792458.0;

/// Starlink-like Ku-band downlink carrier [Hz].
inline constexpr double kDefaultCarrierHz = 11.325e9;
/// Downlink frame period [s].
inline constexpr double kDefaultFramePeriod = 1.0 / 750.0;

}  // namespace leosop
