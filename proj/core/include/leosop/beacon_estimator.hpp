#pragma once

// Gated coherent beacon estimation over a frame sequence, ambiguity
// resolution against the sync preamble and the pilot constellation, and pilot
// classification of the demodulated estimate.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leosop/capture_io.hpp"
#include "leosop/correlator.hpp"
#include "leosop/ofdm.hpp"
#include "leosop/orbit.hpp"
#include "leosop/phase_tracker.hpp"
#include "leosop/types.hpp"

namespace leosop {

struct BeaconSpec;

/// Random-access source of equally long frames.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::size_t size() const = 0;
  virtual std::size_t frame_len() const = 0;
  virtual FrameSignal frame(std::size_t i) const = 0;
};

/// Frames held in memory (not owned).
class VectorFrameSource : public FrameSource {
 public:
  explicit VectorFrameSource(const std::vector<FrameSignal>& frames);
  std::size_t size() const override { return frames_->size(); }
  std::size_t frame_len() const override;
  FrameSignal frame(std::size_t i) const override { return (*frames_)[i]; }

 private:
  const std::vector<FrameSignal>* frames_;
};

/// Consecutive frames of a capture file.
class CaptureFrameSource : public FrameSource {
 public:
  CaptureFrameSource(const CaptureReader& reader, std::size_t frame_len);
  std::size_t size() const override { return count_; }
  std::size_t frame_len() const override { return frame_len_; }
  FrameSignal frame(std::size_t i) const override { return reader_->read_frame(i, frame_len_); }

 private:
  const CaptureReader* reader_;
  std::size_t frame_len_;
  std::size_t count_;
};

/// A subset (by position) of another source.
class SubsetFrameSource : public FrameSource {
 public:
  SubsetFrameSource(const FrameSource& base, std::vector<std::size_t> positions);
  std::size_t size() const override { return positions_.size(); }
  std::size_t frame_len() const override { return base_->frame_len(); }
  FrameSignal frame(std::size_t i) const override { return base_->frame(positions_[i]); }

 private:
  const FrameSource* base_;
  std::vector<std::size_t> positions_;
};

struct Ambiguities {
  double f_DK_hz = 0.0;
  double theta_K_rad = 0.0;
  std::int64_t d_K_samples = 0;
  bool f_resolved = false;
  bool theta_resolved = false;
  bool d_resolved = false;
  /// Constellation error at the chosen f_DK (lower is better).
  double constellation_error = 0.0;

  bool resolved() const { return f_resolved && d_resolved; }
};

struct BeaconEstimate {
  ComplexVector b_hat;
  std::size_t accepted_count = 0;
  std::size_t total_frames_seen = 0;
  Ambiguities ambiguities;
  /// frame_index of the seed frame, if one was found.
  std::optional<std::uint64_t> seed_frame_index;
  /// A priori tracker state at the last processed frame.
  TrackState last_state;
  std::uint64_t last_frame_index = 0;
  /// Set once resolve_ambiguities rewrote b_hat.
  bool ambiguities_applied = false;

  bool resolved() const { return ambiguities_applied && ambiguities.resolved(); }
};

enum class ThresholdMode { normalized, absolute };
enum class InitPolicy { first_energetic_frame, provided_seed };

struct EstimatorConfig {
  std::size_t K = 1500;
  ThresholdMode threshold_mode = ThresholdMode::normalized;
  /// Normalized peak gate (|c| / (||b|| ||r||)).
  double normalized_threshold = 0.08;
  /// Absolute |c| gate in raw int16 units squared.
  double absolute_threshold = 1e9;
  FrequencyGrid grid{-10.0, 10.0, 0.5};
  KFConfig kf;
  double sample_rate_hz = 3.75e6;
  InitPolicy init_policy = InitPolicy::first_energetic_frame;
  ComplexVector seed;
  CorrelateOptions correlate;

  void validate() const;
  double threshold() const {
    return threshold_mode == ThresholdMode::normalized ? normalized_threshold : absolute_threshold;
  }
};

struct TraceRow {
  std::uint64_t frame_index = 0;
  double delta_f_hz = 0.0;
  double delta_phi_rad = 0.0;
  std::size_t delta_d_samples = 0;
  double peak = 0.0;
  double normalized_peak = 0.0;
  bool accepted = false;
  /// Posterior (or a priori when rejected) tracker state.
  double theta = 0.0;
  double theta_dot = 0.0;
  double theta_ddot = 0.0;
  /// Innovation divided by 2 pi [Hz]; zero when rejected.
  double residual_hz = 0.0;
  /// ||aligned b_hat - wiped frame|| / ||wiped frame|| before averaging.
  double alignment_residual = 0.0;
};

struct EstimationTrace {
  std::optional<std::uint64_t> seed_frame_index;
  std::vector<double> frame_energy;
  std::vector<TraceRow> rows;

  /// `k,theta,theta_dot,theta_ddot,residual_hz,accepted`
  void write_kf_csv(const std::filesystem::path& path) const;
  /// `k,delta_f_hz,delta_phi_rad,delta_d_samples,peak,normalized_peak,accepted`
  void write_csv(const std::filesystem::path& path) const;
};

/// Position of the seed frame: the first frame whose energy exceeds the
/// midpoint of the smallest and largest frame energies (frame 0 when all are
/// equal and nonzero).
std::optional<std::size_t> select_seed_frame(std::span<const double> frame_energy);

BeaconEstimate estimate_beacon(const FrameSource& frames, const EstimatorConfig& cfg,
                               EstimationTrace* trace = nullptr);
BeaconEstimate estimate_beacon(const std::vector<FrameSignal>& frames, const EstimatorConfig& cfg,
                               EstimationTrace* trace = nullptr);

/// Doppler aid from ephemeris: the predicted Doppler at the last processed
/// frame minus the tracker's relative Doppler there.
struct EphemerisAid {
  EphemerisTable ephemeris;
  Vec3 rx_position_ecef_m = Vec3::Zero();
  double carrier_hz = 0.0;
  /// Time of the last processed frame on the ephemeris time axis.
  double t_last_frame = 0.0;
};

struct ResolveAids {
  std::optional<EphemerisAid> ephemeris;
  /// Known waveform at the start of the beacon frame (sync preamble and any
  /// known sync symbols, zeros elsewhere); empty = not available.
  ComplexVector sync_reference;
  /// OFDM layout for the constellation search; n_subcarriers == 0 disables it.
  OfdmParams ofdm;
  double sample_rate_hz = 3.75e6;
  /// Relative spread below which the constellation surface counts as flat.
  double flat_tolerance = 0.05;
  /// Fine candidates per coarse step (each side).
  std::size_t fine_steps = 50;
};

/// Aids built from a beacon layout: preamble plus modulated sync rows, OFDM params.
ResolveAids aids_from_spec(const BeaconSpec& spec, double sample_rate_hz);

BeaconEstimate resolve_ambiguities(const BeaconEstimate& est, const ResolveAids& aids,
                                   const FrequencyGrid& grid_coarse);

/// circshift(b * exp(-j 2 pi f n Ts), -d) * exp(-j theta).
ComplexVector apply_ambiguities(std::span<const Complex> b, double f_hz, std::int64_t d,
                                double theta, double sample_period_s);

/// out[n] = x[(n - shift) mod N].
ComplexVector circshift(std::span<const Complex> x, std::int64_t shift);

/// Throws ConfigError when b_hat is shorter than the layout.
Grid<Complex> demodulate_grid(std::span<const Complex> b_hat, const OfdmParams& params,
                              std::ptrdiff_t cp_offset = 0);

/// RMS magnitude of the cells whose power is at least the mean cell power.
double strong_cell_rms(const Grid<Complex>& grid);

/// Mean squared distance of cells (scaled by 1 / strong_cell_rms) to the
/// nearest of {+-1, +-j, 0}. Zero for an empty or all-zero grid.
double constellation_error(const Grid<Complex>& grid);

/// Phase of the 4-PSK constellation, arg(sum c^4) / 4 over the strong cells.
double constellation_phase(const Grid<Complex>& grid);

struct PilotGrid {
  Grid<bool> mask;
  Grid<Complex> symbols;
  double pilot_fraction = 0.0;
};

inline constexpr double kDefaultPilotThreshold = 0.5;
inline constexpr double kDefaultPilotNormalization = 1e4;

/// mask = |cell| / normalization > threshold; fraction over all cells.
PilotGrid classify_pilots(const Grid<Complex>& grid, double magnitude_threshold = kDefaultPilotThreshold,
                          double normalization = kDefaultPilotNormalization);
/// Same, with the fraction taken over non-gutter cells of the non-sync rows.
PilotGrid classify_pilots(const Grid<Complex>& grid, double magnitude_threshold, double normalization,
                          const BeaconSpec& layout);

/// Positions (into `frame_times`) whose highest SV elevation reaches the mask.
std::vector<std::size_t> elevation_prefilter(std::span<const double> frame_times,
                                             const std::vector<EphemerisTable>& ephemerides,
                                             const Vec3& rx_position_ecef_m, double mask_rad);

/// Writes b_hat as an int16 capture; ambiguities and counts go to the sidecar.
void save_beacon(const std::filesystem::path& path, const BeaconEstimate& est,
                 double sample_rate_hz, double carrier_hz, const std::string& config_hash = {});
BeaconEstimate load_beacon(const std::filesystem::path& path, CaptureMeta* meta = nullptr);

/// |<a, b>| / (||a|| ||b||); 0 when either is zero.
double normalized_correlation(std::span<const Complex> a, std::span<const Complex> b);

}  // namespace leosop
