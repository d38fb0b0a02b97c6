#pragma once

// Pipeline stages behind the `leosop` command: simulate, estimate-beacon,
// acquire, solve and report. Each stage reads the artifacts of the previous
// ones from the output directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "leosop/acquisition.hpp"
#include "leosop/beacon_estimator.hpp"
#include "leosop/errors.hpp"
#include "leosop/nav.hpp"
#include "leosop/scenario.hpp"

namespace leosop::pipeline {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kUnresolvedBeacon = 3,
  kSolveFailed = 4,
  kIoError = 5,
};

class UnresolvedBeaconError : public Error {
 public:
  using Error::Error;
};

class SolveError : public Error {
 public:
  using Error::Error;
};

struct PassSpec {
  std::string sv_id;
  double altitude_m = 550e3;
  double inclination_deg = 53.0;
  double pass_time_s = 0.0;
  double ground_offset_east_km = 0.0;
  double ground_offset_north_km = 0.0;
  bool ascending = true;
};

struct CaptureSpec {
  bool enabled = false;
  double start_time = 0.0;
  std::size_t frames = 10;
  std::size_t stride = 1;
  std::optional<double> snr_db;
  DataFill data_fill = DataFill::random_qpsk;
  DutyCycle duty_cycle;
  std::optional<FixedDynamics> fixed_dynamics;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::string beacon_preset = "desk";
  std::uint64_t beacon_seed = 1;
  double carrier_hz = 11.325e9;
  double sample_rate_hz = 3.75e6;
  double beacon_rms = 1000.0;
  double lat_deg = 45.0;
  double lon_deg = 7.7;
  double height_m = 250.0;
  /// Offset of the assumed receiver (association aid) from the true one, ENU [m].
  Vec3 assumed_offset_enu_m = Vec3::Zero();
  ClockModel clock;
  std::vector<PassSpec> passes;
  std::vector<OrbitSpec> orbits;
  CaptureSpec estimation;
  CaptureSpec acquisition_capture;
  double ephemeris_step_s = 10.0;
  double ephemeris_margin_s = 60.0;

  EstimatorConfig estimator;
  FrequencyGrid coarse_grid{-300e3, 300e3, 1000.0};
  bool use_ephemeris_aid = true;
  double pilot_threshold = kDefaultPilotThreshold;
  /// Empty = normalize by the strong-cell RMS of the estimated grid.
  std::optional<double> pilot_normalization;

  AcquisitionConfig acquisition;
  AssociationConfig association;

  NavConfig nav;
  std::vector<double> lambda_sweep{0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.9, 1.0};
  /// Initial position offset from the assumed receiver, ENU [m].
  Vec3 initial_offset_enu_m{40e3, 0.0, 0.0};

  std::filesystem::path source;

  Vec3 rx_position() const;
  Vec3 assumed_rx_position() const;
  std::vector<OrbitSpec> all_orbits() const;
  BeaconSpec beacon_spec() const;
  ScenarioConfig scenario(const CaptureSpec& capture, std::uint64_t seed) const;
};

/// Parses a JSON config. Syntax errors carry line:column, semantic errors the
/// key path. Unknown keys are rejected.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& source = "<string>");

struct RunOptions {
  std::filesystem::path out_dir = "out";
  bool verbose = false;
};

/// File layout under the output directory.
struct Layout {
  std::filesystem::path dir;
  std::filesystem::path estimation_capture() const { return dir / "estimation.iq"; }
  std::filesystem::path estimation_truth() const { return dir / "estimation_truth.csv"; }
  std::filesystem::path acquisition_capture() const { return dir / "acquisition.iq"; }
  std::filesystem::path acquisition_truth() const { return dir / "acquisition_truth.csv"; }
  std::filesystem::path ephemeris_dir() const { return dir / "ephemeris"; }
  std::filesystem::path beacon() const { return dir / "beacon.iq"; }
  std::filesystem::path beacon_trace() const { return dir / "beacon_trace.csv"; }
  std::filesystem::path kf_trace() const { return dir / "kf_trace.csv"; }
  std::filesystem::path phase_diff() const { return dir / "phase_diff.csv"; }
  std::filesystem::path pilot_grid() const { return dir / "pilot_grid.csv"; }
  std::filesystem::path measurements() const { return dir / "measurements.csv"; }
  std::filesystem::path solution() const { return dir / "solution.txt"; }
  std::filesystem::path residuals() const { return dir / "residuals.csv"; }
  std::filesystem::path lambda_sweep() const { return dir / "lambda_sweep.csv"; }
  std::filesystem::path report_dir() const { return dir / "report"; }
};

struct SimulateSummary {
  std::size_t frames = 0;
  std::size_t active = 0;
  std::vector<std::string> warnings;
};

SimulateSummary run_simulate(const PipelineConfig& cfg, const RunOptions& opts);
BeaconEstimate run_estimate_beacon(const PipelineConfig& cfg, const RunOptions& opts);
std::vector<DopplerMeasurement> run_acquire(const PipelineConfig& cfg, const RunOptions& opts);
NavSolution run_solve(const PipelineConfig& cfg, const RunOptions& opts);
void run_report(const PipelineConfig& cfg, const RunOptions& opts);

/// Ephemeris tables written by run_simulate.
std::vector<EphemerisTable> load_ephemerides(const Layout& layout);

}  // namespace leosop::pipeline
