#pragma once

// One-frame Doppler acquisition against an estimated beacon and association
// of the measurements to satellites through predicted Doppler curves.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "leosop/beacon_estimator.hpp"
#include "leosop/correlator.hpp"
#include "leosop/orbit.hpp"

namespace leosop {

struct DopplerMeasurement {
  /// Seconds since capture start, at the middle of the frame.
  double t = 0.0;
  double f_d_hz = 0.0;
  double peak = 0.0;
  double normalized_peak = 0.0;
  std::optional<std::string> sv_id;
  std::uint64_t frame_index = 0;
};

struct AcquisitionConfig {
  double cadence_s = 1.0;
  /// Full search span; its step is the fine resolution.
  FrequencyGrid wide_grid{-300e3, 300e3, 10.0};
  bool hierarchical = true;
  double coarse_step_hz = 1000.0;
  double fine_half_span_hz = 2000.0;
  /// Normalized-peak gate for emitting a measurement.
  double gate = 0.1;
  /// Workers across epochs (0 = hardware concurrency).
  unsigned threads = 1;

  void validate() const;
};

/// Correlates one frame over the wide grid (flat or coarse-then-fine).
CorrelationResult acquire_frame(const BeaconCorrelator& beacon, std::span<const Complex> frame,
                                const AcquisitionConfig& cfg, double sample_period_s);

/// Frames are taken every `cadence_s` of capture time. `frame_stride` is the
/// number of frame periods between stored frames. Throws ConfigError when the
/// beacon is unresolved or the cadence is shorter than a frame.
std::vector<DopplerMeasurement> acquire_doppler_series(const FrameSource& frames,
                                                       const BeaconEstimate& beacon,
                                                       const AcquisitionConfig& cfg,
                                                       double sample_rate_hz,
                                                       std::size_t frame_stride = 1);

struct AssociationConfig {
  double gate_hz = 2000.0;
  /// The runner-up must be farther than best + margin.
  double margin_hz = 4000.0;
  /// Only SVs at or above this elevation are candidates.
  double elevation_mask_rad = 0.0;
  double carrier_hz = 11.325e9;
  /// Ephemeris time of the capture start.
  double time_offset_s = 0.0;
};

/// Fills sv_id where the nearest predicted Doppler is within the gate and
/// unambiguous; other measurements come back unassigned.
std::vector<DopplerMeasurement> associate_measurements(std::vector<DopplerMeasurement> meas,
                                                       const std::vector<EphemerisTable>& ephemerides,
                                                       const Vec3& rx_pos_assumed,
                                                       const AssociationConfig& cfg);

/// `t,f_d_hz,peak,normalized_peak,sv_id`
void write_measurements_csv(const std::filesystem::path& path,
                            const std::vector<DopplerMeasurement>& meas);
std::vector<DopplerMeasurement> read_measurements_csv(const std::filesystem::path& path);

}  // namespace leosop
