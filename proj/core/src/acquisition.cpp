#include "leosop/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "leosop/csv.hpp"
#include "leosop/errors.hpp"

namespace leosop {

void AcquisitionConfig::validate() const {
  if (!(cadence_s > 0.0)) throw ConfigError("acquisition: cadence_s must be > 0");
  wide_grid.validate();
  if (!(gate > 0.0) || gate > 1.0) throw ConfigError("acquisition: gate must lie in (0, 1]");
  if (hierarchical) {
    if (!(coarse_step_hz > 0.0)) throw ConfigError("acquisition: coarse_step_hz must be > 0");
    if (!(fine_half_span_hz > 0.0)) throw ConfigError("acquisition: fine_half_span_hz must be > 0");
  }
}

CorrelationResult acquire_frame(const BeaconCorrelator& beacon, std::span<const Complex> frame,
                                const AcquisitionConfig& cfg, double ts) {
  const FrequencyGrid& wide = cfg.wide_grid;
  if (!cfg.hierarchical) return beacon.correlate(frame, wide, ts);

  const FrequencyGrid coarse{wide.f_min, wide.f_max, cfg.coarse_step_hz};
  const CorrelationResult c = beacon.correlate(frame, coarse, ts);
  if (c.degenerate) return c;

  // Fine pass on the wide grid's own lattice so results match a flat search.
  const double step = wide.f_step;
  const auto last = static_cast<double>(wide.size() - 1);
  const double i_lo = std::clamp(std::ceil((c.delta_f_hz - cfg.fine_half_span_hz - wide.f_min) / step - 1e-9), 0.0, last);
  const double i_hi = std::clamp(std::floor((c.delta_f_hz + cfg.fine_half_span_hz - wide.f_min) / step + 1e-9), 0.0, last);
  const FrequencyGrid fine{wide.at(static_cast<std::size_t>(i_lo)), wide.at(static_cast<std::size_t>(i_hi)), step};
  CorrelationResult r = beacon.correlate(frame, fine, ts);
  r.freq_index += static_cast<std::size_t>(i_lo);
  return r;
}

std::vector<DopplerMeasurement> acquire_doppler_series(const FrameSource& frames,
                                                       const BeaconEstimate& beacon,
                                                       const AcquisitionConfig& cfg,
                                                       double sample_rate_hz,
                                                       std::size_t frame_stride) {
  cfg.validate();
  if (!beacon.resolved()) throw ConfigError("acquire_doppler_series: beacon ambiguities are unresolved");
  if (!(sample_rate_hz > 0.0)) throw ConfigError("acquire_doppler_series: sample rate must be > 0");
  if (frame_stride < 1) throw ConfigError("acquire_doppler_series: frame_stride must be >= 1");
  const std::size_t n = frames.frame_len();
  if (beacon.b_hat.size() != n)
    throw ConfigError("acquire_doppler_series: beacon length " + std::to_string(beacon.b_hat.size()) +
                      " differs from frame length " + std::to_string(n));
  const double ts = 1.0 / sample_rate_hz;
  const double t_fr = static_cast<double>(n) * ts;
  if (cfg.cadence_s < t_fr * (1.0 - 1e-9))
    throw ConfigError("acquire_doppler_series: cadence shorter than one frame");
  const double t_stored = t_fr * static_cast<double>(frame_stride);

  std::vector<std::size_t> positions;
  for (std::size_t j = 0;; ++j) {
    const double t = static_cast<double>(j) * cfg.cadence_s;
    const auto pos = static_cast<std::size_t>(std::llround(t / t_stored));
    if (pos >= frames.size()) break;
    if (positions.empty() || positions.back() != pos) positions.push_back(pos);
  }

  const BeaconCorrelator correlator(beacon.b_hat);
  std::vector<std::optional<DopplerMeasurement>> slots(positions.size());
  unsigned threads = cfg.threads == 0 ? std::thread::hardware_concurrency() : cfg.threads;
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, positions.size()))));
  const auto work = [&](unsigned w) {
    for (std::size_t i = w; i < positions.size(); i += threads) {
      const FrameSignal f = frames.frame(positions[i]);
      const CorrelationResult c = acquire_frame(correlator, f.samples, cfg, ts);
      if (c.degenerate || c.normalized_peak < cfg.gate) continue;
      DopplerMeasurement m;
      m.frame_index = f.frame_index;
      m.t = static_cast<double>(f.frame_index) * t_stored + 0.5 * t_fr;
      m.f_d_hz = c.delta_f_hz;
      m.peak = c.peak;
      m.normalized_peak = c.normalized_peak;
      slots[i] = m;
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  std::vector<DopplerMeasurement> out;
  for (auto& s : slots)
    if (s) out.push_back(std::move(*s));
  return out;
}

std::vector<DopplerMeasurement> associate_measurements(std::vector<DopplerMeasurement> meas,
                                                       const std::vector<EphemerisTable>& ephemerides,
                                                       const Vec3& rx, const AssociationConfig& cfg) {
  for (auto& m : meas) {
    m.sv_id.reset();
    const double t = m.t + cfg.time_offset_s;
    double best = std::numeric_limits<double>::infinity();
    double runner_up = std::numeric_limits<double>::infinity();
    const EphemerisTable* best_sv = nullptr;
    for (const auto& e : ephemerides) {
      if (!e.covers(t)) continue;
      const StateVector sv = e.interpolate(t);
      if (elevation(rx, sv.position_ecef_m) < cfg.elevation_mask_rad) continue;
      const double d = std::abs(m.f_d_hz - predicted_doppler(sv, rx, Vec3::Zero(), cfg.carrier_hz));
      if (d < best) {
        runner_up = best;
        best = d;
        best_sv = &e;
      } else if (d < runner_up) {
        runner_up = d;
      }
    }
    if (best_sv && best < cfg.gate_hz && runner_up - best > cfg.margin_hz) m.sv_id = best_sv->sv_id();
  }
  return meas;
}

void write_measurements_csv(const std::filesystem::path& path,
                            const std::vector<DopplerMeasurement>& meas) {
  CsvWriter out(path, {"t", "f_d_hz", "peak", "normalized_peak", "sv_id"});
  for (const auto& m : meas) out.row(m.t, m.f_d_hz, m.peak, m.normalized_peak, m.sv_id.value_or(""));
  out.close();
}

std::vector<DopplerMeasurement> read_measurements_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::size_t ct = table.column("t");
  const std::size_t cf = table.column("f_d_hz");
  const std::size_t cp = table.column("peak");
  const std::size_t cn = table.column("normalized_peak");
  const std::size_t cs = table.column("sv_id");
  std::vector<DopplerMeasurement> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    DopplerMeasurement m;
    m.t = parse_double(row[ct], path, i + 2);
    m.f_d_hz = parse_double(row[cf], path, i + 2);
    m.peak = parse_double(row[cp], path, i + 2);
    m.normalized_peak = parse_double(row[cn], path, i + 2);
    if (!row[cs].empty()) m.sv_id = row[cs];
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace leosop
