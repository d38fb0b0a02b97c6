#pragma once

// Ground-truth beacon construction and synthetic capture generation.
//
// Each active frame is r_k[n] = (b + data_k)[n - d_k] exp(j Theta_k[n]) + w_k[n]
// with Theta_k the frame-start Taylor triple (theta, 2 pi f_D, 2 pi f_D_dot)
// taken from the active SV's geometry. Silent frames hold noise only.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "leosop/capture_io.hpp"
#include "leosop/ofdm.hpp"
#include "leosop/orbit.hpp"
#include "leosop/types.hpp"

namespace leosop {

struct BeaconSpec {
  std::size_t n_subcarriers = 0;
  std::size_t cp_len = 0;
  std::size_t n_ofdm_symbols = 0;
  /// Samples per frame; preamble + OFDM symbols + silent tail.
  std::size_t frame_len = 0;
  /// [symbol x subcarrier column] cells carrying recurring pilots.
  Grid<bool> pilot_mask;
  /// Pilot values (4-PSK scaled by the symbol amplitude); zero off-mask.
  Grid<Complex> pilot_symbols;
  /// Cells that carry random traffic when the scenario fills data.
  Grid<bool> data_mask;
  /// Per-symbol amplitude used for pilots and data.
  std::vector<double> symbol_amplitude;
  /// Non-OFDM sync sequence placed at the start of the frame.
  ComplexVector sync_preamble;
  /// Subcarrier indices forced silent in every symbol.
  std::vector<int> gutter_tones;
  /// Grid rows treated as sync symbols (excluded from the pilot fraction).
  std::vector<std::size_t> sync_symbols;

  OfdmParams ofdm() const;
  bool is_gutter_column(std::size_t column) const;
  /// Throws ConfigError on shape mismatch or a layout longer than frame_len.
  void validate() const;
};

/// 128 subcarriers, CP 16, 32 symbols, 256-sample preamble, 5000-sample frame,
/// pilots on every fourth subcarrier.
BeaconSpec desk_beacon_spec(std::uint64_t seed = 1);

/// 302-slot frame: slot 1 holds the preamble (PSS stand-in), slots 2..302 are
/// OFDM rows 0..300. Slot 2 is a fully pilot sync symbol, slot 4 is silent,
/// slot 8 is fully pilot at 3/4 amplitude; the pilot-cell fraction over the
/// non-sync rows is 61.8%.
BeaconSpec starlink_like_beacon_spec(std::uint64_t seed = 1);

/// Paper-slot numbering used by the Starlink-like preset (slot = row + 2).
inline constexpr std::size_t kStarlinkSlotOffset = 2;

/// Time-domain beacon of length frame_len.
ComplexVector build_beacon(const BeaconSpec& spec);

/// Pilot cells over non-gutter cells of the non-sync rows.
double pilot_fraction(const BeaconSpec& spec);
double pilot_fraction(const Grid<bool>& mask, const BeaconSpec& spec);

/// Per-row pilot energy of the spec (sum of |pilot|^2 per row).
std::vector<double> symbol_energy_profile(const BeaconSpec& spec);

enum class DataFill { random_qpsk, silent };

struct DutyCycle {
  enum class Mode { highest_elevation, round_robin, fixed, silent };
  Mode mode = Mode::highest_elevation;
  /// SV for Mode::fixed.
  std::string sv_id;
  /// Probability that an otherwise active frame carries a transmission.
  double active_fraction = 1.0;
  double elevation_mask_deg = 10.0;
};

struct ClockModel {
  double bias_s = 0.0;
  /// Fractional frequency error (s/s); shifts every Doppler by -f_c * drift.
  double drift = 0.0;
};

/// Overrides geometry with constant dynamics (tests and degenerate runs).
struct FixedDynamics {
  double f_d_hz = 0.0;
  double f_d_rate_hz_s = 0.0;
  double theta_rad = 0.0;
  std::int64_t d_samples = 0;
  std::string sv_id = "SIM";
};

struct ScenarioConfig {
  Vec3 rx_position_ecef_m = Vec3::Zero();
  std::vector<OrbitSpec> orbits;
  std::size_t K_frames = 1;
  /// Frame periods between consecutive stored frames (1 = contiguous).
  std::size_t frame_stride = 1;
  double start_time = 0.0;
  /// Beacon-sample power over noise power; empty means noise-free.
  std::optional<double> snr_db;
  DutyCycle duty_cycle;
  DataFill data_fill = DataFill::random_qpsk;
  ClockModel clock;
  double carrier_hz = 11.325e9;
  double sample_rate_hz = 3.75e6;
  /// RMS of the planted beacon in raw sample units.
  double beacon_rms = 1000.0;
  /// Std of the per-frame code-phase random walk [samples].
  double code_phase_walk_std = 0.0;
  /// Std of white per-frame frequency noise on the Doppler [Hz].
  double freq_noise_hz = 0.0;
  std::optional<FixedDynamics> fixed_dynamics;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TruthRecord {
  std::size_t k = 0;
  double t = 0.0;
  std::string sv_id;
  double f_d_hz = 0.0;
  double f_d_rate_hz_s = 0.0;
  std::int64_t d_k = 0;
  double theta_k = 0.0;
  bool active = false;
};

struct TruthLog {
  std::vector<TruthRecord> frames;
  std::size_t frame_len = 0;
  std::size_t frame_stride = 1;
  double sample_rate_hz = 0.0;
  double snr_db = 0.0;
  bool noise_free = true;
  double beacon_power = 0.0;
  double noise_variance = 0.0;
  /// Planted beacon at capture scale.
  ComplexVector beacon;

  double frame_period() const { return static_cast<double>(frame_len) / sample_rate_hz; }
  std::size_t active_count() const;

  /// CSV `k,sv_id,f_d_hz,f_d_rate_hz_s,d_k_samples,theta_k_rad,active`.
  void write_csv(const std::filesystem::path& path) const;
  static std::vector<TruthRecord> read_csv(const std::filesystem::path& path);
};

struct SyntheticCapture {
  std::vector<FrameSignal> frames;
  TruthLog truth;
  CaptureMeta meta;

  ComplexVector concatenated() const;
};

/// Scales `beacon` to the requested RMS.
ComplexVector scale_to_rms(const ComplexVector& beacon, double rms);

/// Per-frame truth (duty cycle, geometry, code phase walk). Deterministic given the seed.
std::vector<TruthRecord> plan_frames(const ScenarioConfig& config, std::size_t frame_len);

/// Synthesizes one frame from its truth record.
FrameSignal synthesize_frame(const ScenarioConfig& config, const BeaconSpec& spec,
                             const ComplexVector& scaled_beacon, double data_scale,
                             const TruthRecord& truth, double noise_variance);

SyntheticCapture synthesize_capture(const ScenarioConfig& config, const BeaconSpec& spec,
                                    const ComplexVector& beacon);

/// Capture metadata of a synthesized scenario; frame layout lives in `extra`.
CaptureMeta scenario_meta(const ScenarioConfig& config, std::size_t frame_len,
                          std::uint64_t sample_count);

}  // namespace leosop
