#include "leosop/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "leosop/constants.hpp"
#include "leosop/csv.hpp"
#include "leosop/errors.hpp"

namespace leosop {
namespace {

constexpr std::array<int, 4> kCenterGutter{-2, -1, 0, 1};

Complex qpsk(std::uint64_t symbol) {
  switch (symbol & 3u) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

std::mt19937_64 frame_rng(std::uint64_t seed, std::uint64_t k, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

ComplexVector repeated_preamble(std::size_t segment_len, const std::vector<double>& signs,
                                double amplitude, std::mt19937_64& rng) {
  ComplexVector segment(segment_len);
  for (auto& v : segment) v = amplitude * std::polar(1.0, kPi / 4 + kPi / 2 * static_cast<double>(rng() & 3u));
  ComplexVector out;
  out.reserve(segment_len * signs.size());
  for (double s : signs)
    for (const auto& v : segment) out.push_back(s * v);
  return out;
}

struct Layout {
  std::size_t n_subcarriers;
  std::size_t cp_len;
  std::size_t n_symbols;
  std::size_t frame_len;
};

BeaconSpec empty_spec(const Layout& layout) {
  BeaconSpec spec;
  spec.n_subcarriers = layout.n_subcarriers;
  spec.cp_len = layout.cp_len;
  spec.n_ofdm_symbols = layout.n_symbols;
  spec.frame_len = layout.frame_len;
  spec.pilot_mask = Grid<bool>(layout.n_symbols, layout.n_subcarriers, false);
  spec.pilot_symbols = Grid<Complex>(layout.n_symbols, layout.n_subcarriers);
  spec.data_mask = Grid<bool>(layout.n_symbols, layout.n_subcarriers, false);
  spec.symbol_amplitude.assign(layout.n_symbols, 1.0);
  spec.gutter_tones.assign(kCenterGutter.begin(), kCenterGutter.end());
  return spec;
}

bool comb_column(std::size_t column, std::size_t n_subcarriers) {
  const int sc = subcarrier_of_column(column, n_subcarriers);
  return ((sc % 4) + 4) % 4 == 0;
}

// Assigns random 4-PSK pilots on the mask and marks the remaining usable
// cells of non-sync, non-silent rows as data cells.
void finalize_cells(BeaconSpec& spec, const std::vector<bool>& silent_rows, std::mt19937_64& rng) {
  for (std::size_t r = 0; r < spec.n_ofdm_symbols; ++r) {
    const bool sync = std::find(spec.sync_symbols.begin(), spec.sync_symbols.end(), r) !=
                      spec.sync_symbols.end();
    for (std::size_t c = 0; c < spec.n_subcarriers; ++c) {
      if (spec.is_gutter_column(c)) {
        spec.pilot_mask(r, c) = false;
        continue;
      }
      if (spec.pilot_mask(r, c)) {
        spec.pilot_symbols(r, c) = spec.symbol_amplitude[r] * qpsk(rng());
      } else if (!sync && !silent_rows[r]) {
        spec.data_mask(r, c) = true;
      }
    }
  }
}

double rms(const ComplexVector& x) {
  if (x.empty()) return 0.0;
  double e = 0.0;
  for (const auto& v : x) e += std::norm(v);
  return std::sqrt(e / static_cast<double>(x.size()));
}

}  // namespace

OfdmParams BeaconSpec::ofdm() const {
  return OfdmParams{n_subcarriers, cp_len, n_ofdm_symbols, sync_preamble.size()};
}

bool BeaconSpec::is_gutter_column(std::size_t column) const {
  const int sc = subcarrier_of_column(column, n_subcarriers);
  return std::find(gutter_tones.begin(), gutter_tones.end(), sc) != gutter_tones.end();
}

void BeaconSpec::validate() const {
  ofdm().validate();
  if (!pilot_mask.same_shape(n_ofdm_symbols, n_subcarriers) ||
      !pilot_symbols.same_shape(n_ofdm_symbols, n_subcarriers) ||
      !data_mask.same_shape(n_ofdm_symbols, n_subcarriers))
    throw ConfigError("beacon spec: mask/grid shape does not match symbols x subcarriers");
  if (symbol_amplitude.size() != n_ofdm_symbols)
    throw ConfigError("beacon spec: one amplitude per symbol required");
  if (ofdm().total_len() > frame_len)
    throw ConfigError("beacon spec: preamble + OFDM symbols (" + std::to_string(ofdm().total_len()) +
                      ") exceed frame length " + std::to_string(frame_len));
  for (std::size_t r : sync_symbols)
    if (r >= n_ofdm_symbols) throw ConfigError("beacon spec: sync symbol index out of range");
  for (std::size_t r = 0; r < n_ofdm_symbols; ++r) {
    for (std::size_t c = 0; c < n_subcarriers; ++c) {
      if (is_gutter_column(c) && (pilot_mask(r, c) || data_mask(r, c)))
        throw ConfigError("beacon spec: gutter tone carries energy");
      if (!pilot_mask(r, c) && pilot_symbols(r, c) != Complex{})
        throw ConfigError("beacon spec: pilot value outside the pilot mask");
    }
  }
}

BeaconSpec desk_beacon_spec(std::uint64_t seed) {
  BeaconSpec spec = empty_spec({128, 16, 32, 5000});
  std::mt19937_64 rng(seed);
  spec.sync_preamble = repeated_preamble(64, {1.0, 1.0, -1.0, 1.0}, 0.5, rng);
  for (std::size_t r = 0; r < spec.n_ofdm_symbols; ++r)
    for (std::size_t c = 0; c < spec.n_subcarriers; ++c)
      spec.pilot_mask(r, c) = comb_column(c, spec.n_subcarriers);
  finalize_cells(spec, std::vector<bool>(spec.n_ofdm_symbols, false), rng);
  spec.validate();
  return spec;
}

BeaconSpec starlink_like_beacon_spec(std::uint64_t seed) {
  // 64 subcarriers + CP 8 per slot; slot 1 is the preamble, 301 OFDM rows.
  constexpr std::size_t kNsc = 64;
  constexpr std::size_t kCp = 8;
  constexpr std::size_t kRows = 301;
  BeaconSpec spec = empty_spec({kNsc, kCp, kRows, (kRows + 1) * (kNsc + kCp)});
  std::mt19937_64 rng(seed);
  spec.sync_preamble = repeated_preamble(18, {1.0, 1.0, -1.0, 1.0}, 0.5, rng);
  spec.sync_symbols = {0};  // slot 2

  const auto row = [](std::size_t slot) { return slot - kStarlinkSlotOffset; };
  std::vector<bool> silent(kRows, false);
  silent[row(4)] = true;
  spec.symbol_amplitude[row(8)] = 0.75;

  std::vector<bool> full(kRows, false);
  full[row(2)] = true;
  full[row(8)] = true;
  for (std::size_t slot = 157; slot <= 302; ++slot) full[row(slot)] = true;

  for (std::size_t r = 0; r < kRows; ++r) {
    if (silent[r]) continue;
    for (std::size_t c = 0; c < kNsc; ++c) spec.pilot_mask(r, c) = full[r] || comb_column(c, kNsc);
  }
  // Slot 5 carries 24 extra pilots beyond the comb, bringing the non-sync
  // pilot fraction to 11124 / 18000.
  std::size_t extra = 0;
  for (std::size_t c = 0; c < kNsc && extra < 24; ++c) {
    const int sc = subcarrier_of_column(c, kNsc);
    if (!comb_column(c, kNsc) && (sc < -2 || sc > 1)) {
      spec.pilot_mask(row(5), c) = true;
      ++extra;
    }
  }
  finalize_cells(spec, silent, rng);
  spec.validate();
  return spec;
}

ComplexVector build_beacon(const BeaconSpec& spec) {
  spec.validate();
  ComplexVector out(spec.frame_len);
  std::copy(spec.sync_preamble.begin(), spec.sync_preamble.end(), out.begin());
  const ComplexVector symbols = ofdm_modulate(spec.pilot_symbols, spec.ofdm());
  std::copy(symbols.begin(), symbols.end(),
            out.begin() + static_cast<std::ptrdiff_t>(spec.sync_preamble.size()));
  return out;
}

double pilot_fraction(const Grid<bool>& mask, const BeaconSpec& spec) {
  std::size_t pilots = 0;
  std::size_t cells = 0;
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    if (std::find(spec.sync_symbols.begin(), spec.sync_symbols.end(), r) != spec.sync_symbols.end())
      continue;
    for (std::size_t c = 0; c < mask.cols(); ++c) {
      if (spec.is_gutter_column(c)) continue;
      ++cells;
      if (mask(r, c)) ++pilots;
    }
  }
  return cells == 0 ? 0.0 : static_cast<double>(pilots) / static_cast<double>(cells);
}

double pilot_fraction(const BeaconSpec& spec) { return pilot_fraction(spec.pilot_mask, spec); }

std::vector<double> symbol_energy_profile(const BeaconSpec& spec) {
  std::vector<double> energy(spec.n_ofdm_symbols, 0.0);
  for (std::size_t r = 0; r < spec.n_ofdm_symbols; ++r)
    for (std::size_t c = 0; c < spec.n_subcarriers; ++c) energy[r] += std::norm(spec.pilot_symbols(r, c));
  return energy;
}

void ScenarioConfig::validate() const {
  if (K_frames < 1) throw ConfigError("scenario: K_frames must be >= 1");
  if (frame_stride < 1) throw ConfigError("scenario: frame_stride must be >= 1");
  if (!(sample_rate_hz > 0.0)) throw ConfigError("scenario: sample_rate_hz must be > 0");
  if (!(beacon_rms > 0.0)) throw ConfigError("scenario: beacon_rms must be > 0");
  if (duty_cycle.active_fraction < 0.0 || duty_cycle.active_fraction > 1.0)
    throw ConfigError("scenario: duty_cycle.active_fraction must lie in [0, 1]");
  if (code_phase_walk_std < 0.0 || freq_noise_hz < 0.0)
    throw ConfigError("scenario: noise standard deviations must be >= 0");
  if (!fixed_dynamics && duty_cycle.mode != DutyCycle::Mode::silent && orbits.empty())
    throw ConfigError("scenario: no orbits and no fixed dynamics");
  if (!fixed_dynamics && duty_cycle.mode != DutyCycle::Mode::silent && rx_position_ecef_m.norm() < 1.0)
    throw ConfigError("scenario: receiver position required for orbital dynamics");
  for (const auto& o : orbits) o.validate();
  if (duty_cycle.mode == DutyCycle::Mode::fixed && !fixed_dynamics) {
    const bool known = std::any_of(orbits.begin(), orbits.end(),
                                   [&](const OrbitSpec& o) { return o.sv_id == duty_cycle.sv_id; });
    if (!known) throw ConfigError("scenario: duty_cycle.sv_id '" + duty_cycle.sv_id + "' not in orbits");
  }
}

std::size_t TruthLog::active_count() const {
  return static_cast<std::size_t>(
      std::count_if(frames.begin(), frames.end(), [](const TruthRecord& r) { return r.active; }));
}

void TruthLog::write_csv(const std::filesystem::path& path) const {
  CsvWriter out(path, {"k", "sv_id", "f_d_hz", "f_d_rate_hz_s", "d_k_samples", "theta_k_rad", "active"});
  for (const auto& r : frames)
    out.row(r.k, r.sv_id, r.f_d_hz, r.f_d_rate_hz_s, r.d_k, r.theta_k, r.active);
  out.close();
}

std::vector<TruthRecord> TruthLog::read_csv(const std::filesystem::path& path) {
  const CsvTable table = leosop::read_csv(path);
  std::vector<TruthRecord> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = i + 2;
    TruthRecord r;
    r.k = static_cast<std::size_t>(parse_int(row[table.column("k")], path, line));
    r.sv_id = row[table.column("sv_id")];
    r.f_d_hz = parse_double(row[table.column("f_d_hz")], path, line);
    r.f_d_rate_hz_s = parse_double(row[table.column("f_d_rate_hz_s")], path, line);
    r.d_k = parse_int(row[table.column("d_k_samples")], path, line);
    r.theta_k = parse_double(row[table.column("theta_k_rad")], path, line);
    r.active = parse_int(row[table.column("active")], path, line) != 0;
    out.push_back(r);
  }
  return out;
}

ComplexVector SyntheticCapture::concatenated() const {
  ComplexVector out;
  for (const auto& f : frames) out.insert(out.end(), f.samples.begin(), f.samples.end());
  return out;
}

ComplexVector scale_to_rms(const ComplexVector& beacon, double target) {
  const double current = rms(beacon);
  if (!(current > 0.0)) throw ConfigError("scale_to_rms: beacon has no energy");
  ComplexVector out(beacon);
  for (auto& v : out) v *= target / current;
  return out;
}

std::vector<TruthRecord> plan_frames(const ScenarioConfig& config, std::size_t frame_len) {
  config.validate();
  const double frame_period = static_cast<double>(frame_len) / config.sample_rate_hz;
  const double fc = config.carrier_hz;
  const auto n_fr = static_cast<std::int64_t>(frame_len);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double elevation_mask = config.duty_cycle.elevation_mask_deg * kPi / 180.0;

  const auto doppler_at = [&](const OrbitSpec& o, double t) {
    return predicted_doppler(propagate(o, t), config.rx_position_ecef_m, Vec3::Zero(), fc);
  };

  std::vector<TruthRecord> out;
  out.reserve(config.K_frames);
  double walk = 0.0;
  for (std::size_t k = 0; k < config.K_frames; ++k) {
    TruthRecord rec;
    rec.k = k;
    rec.t = config.start_time + static_cast<double>(k * config.frame_stride) * frame_period;
    const double t_true = rec.t - config.clock.bias_s;
    const double draw_active = uniform(rng);
    const double draw_freq = normal(rng);
    const double draw_walk = normal(rng);
    walk += config.code_phase_walk_std * draw_walk;

    const OrbitSpec* orbit = nullptr;
    bool active = config.duty_cycle.mode != DutyCycle::Mode::silent;
    if (active && !config.fixed_dynamics) {
      std::vector<std::pair<const OrbitSpec*, double>> visible;
      for (const auto& o : config.orbits) {
        const double el = elevation(config.rx_position_ecef_m, propagate(o, t_true).position_ecef_m);
        if (config.duty_cycle.mode == DutyCycle::Mode::fixed) {
          if (o.sv_id == config.duty_cycle.sv_id) visible.emplace_back(&o, el);
        } else if (el >= elevation_mask) {
          visible.emplace_back(&o, el);
        }
      }
      if (visible.empty()) {
        active = false;
      } else if (config.duty_cycle.mode == DutyCycle::Mode::round_robin) {
        orbit = visible[k % visible.size()].first;
      } else {
        orbit = std::max_element(visible.begin(), visible.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; })
                    ->first;
      }
    }
    active = active && draw_active < config.duty_cycle.active_fraction;
    rec.active = active;
    if (active) {
      double f_geom = 0.0;
      double f_rate = 0.0;
      double theta = 0.0;
      double delay_samples = 0.0;
      if (config.fixed_dynamics) {
        const auto& fd = *config.fixed_dynamics;
        rec.sv_id = fd.sv_id;
        f_geom = fd.f_d_hz;
        f_rate = fd.f_d_rate_hz_s;
        theta = fd.theta_rad;
        delay_samples = static_cast<double>(fd.d_samples);
      } else {
        rec.sv_id = orbit->sv_id;
        const StateVector sv = propagate(*orbit, t_true);
        const double range = (sv.position_ecef_m - config.rx_position_ecef_m).norm();
        f_geom = predicted_doppler(sv, config.rx_position_ecef_m, Vec3::Zero(), fc);
        constexpr double h = 0.01;
        f_rate = (doppler_at(*orbit, t_true + h) - doppler_at(*orbit, t_true - h)) / (2 * h);
        const double cycles = fc * range / kSpeedOfLight;
        theta = std::remainder(-kTwoPi * (cycles - std::floor(cycles)), kTwoPi);
        delay_samples = range / kSpeedOfLight * config.sample_rate_hz;
      }
      rec.f_d_hz = f_geom - fc * config.clock.drift + config.freq_noise_hz * draw_freq;
      rec.f_d_rate_hz_s = f_rate;
      rec.theta_k = theta;
      const auto d = static_cast<std::int64_t>(std::llround(delay_samples + walk));
      rec.d_k = ((d % n_fr) + n_fr) % n_fr;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

FrameSignal synthesize_frame(const ScenarioConfig& config, const BeaconSpec& spec,
                             const ComplexVector& scaled_beacon, double data_scale,
                             const TruthRecord& truth, double noise_variance) {
  const std::size_t n = scaled_beacon.size();
  FrameSignal frame{ComplexVector(n), truth.k};
  auto rng = frame_rng(config.seed, truth.k, 0x5eed);

  if (truth.active) {
    ComplexVector content(scaled_beacon);
    if (config.data_fill == DataFill::random_qpsk) {
      Grid<Complex> data(spec.n_ofdm_symbols, spec.n_subcarriers);
      for (std::size_t r = 0; r < data.rows(); ++r)
        for (std::size_t c = 0; c < data.cols(); ++c)
          if (spec.data_mask(r, c)) data(r, c) = data_scale * spec.symbol_amplitude[r] * qpsk(rng());
      const ComplexVector wave = ofdm_modulate(data, spec.ofdm());
      const std::size_t offset = spec.sync_preamble.size();
      for (std::size_t i = 0; i < wave.size(); ++i) content[offset + i] += wave[i];
    }
    const double ts = 1.0 / config.sample_rate_hz;
    const double w = kTwoPi * truth.f_d_hz;
    const double wdot = kTwoPi * truth.f_d_rate_hz_s;
    const auto d = static_cast<std::size_t>(truth.d_k) % n;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) * ts;
      const double phase = truth.theta_k + w * t + 0.5 * wdot * t * t;
      frame.samples[i] = content[(i + n - d) % n] * std::polar(1.0, phase);
    }
  }
  if (noise_variance > 0.0) {
    std::normal_distribution<double> normal(0.0, std::sqrt(noise_variance / 2.0));
    for (auto& v : frame.samples) v += Complex(normal(rng), normal(rng));
  }
  return frame;
}

CaptureMeta scenario_meta(const ScenarioConfig& config, std::size_t frame_len,
                          std::uint64_t sample_count) {
  CaptureMeta meta;
  meta.sample_rate_hz = config.sample_rate_hz;
  meta.center_freq_hz = config.carrier_hz;
  meta.start_time_utc = config.start_time;
  meta.sample_count = sample_count;
  meta.extra["frame_len"] = std::to_string(frame_len);
  meta.extra["frame_stride"] = std::to_string(config.frame_stride);
  return meta;
}

SyntheticCapture synthesize_capture(const ScenarioConfig& config, const BeaconSpec& spec,
                                    const ComplexVector& beacon) {
  spec.validate();
  if (beacon.size() != spec.frame_len)
    throw ConfigError("synthesize_capture: beacon length " + std::to_string(beacon.size()) +
                      " differs from frame length " + std::to_string(spec.frame_len));
  SyntheticCapture out;
  TruthLog& truth = out.truth;
  truth.frame_len = spec.frame_len;
  truth.frame_stride = config.frame_stride;
  truth.sample_rate_hz = config.sample_rate_hz;
  truth.beacon = scale_to_rms(beacon, config.beacon_rms);
  truth.beacon_power = config.beacon_rms * config.beacon_rms;
  truth.noise_free = !config.snr_db.has_value();
  truth.snr_db = config.snr_db.value_or(std::numeric_limits<double>::infinity());
  truth.noise_variance =
      truth.noise_free ? 0.0 : truth.beacon_power / std::pow(10.0, *config.snr_db / 10.0);
  truth.frames = plan_frames(config, spec.frame_len);

  const double data_scale = config.beacon_rms / rms(beacon);
  out.frames.reserve(truth.frames.size());
  for (const auto& rec : truth.frames)
    out.frames.push_back(synthesize_frame(config, spec, truth.beacon, data_scale, rec, truth.noise_variance));
  out.meta = scenario_meta(config, spec.frame_len, truth.frames.size() * spec.frame_len);
  return out;
}

}  // namespace leosop
