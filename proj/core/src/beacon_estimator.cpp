#include "leosop/beacon_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "leosop/constants.hpp"
#include "leosop/csv.hpp"
#include "leosop/errors.hpp"
#include "leosop/scenario.hpp"

namespace leosop {
namespace {

double energy(std::span<const Complex> x) {
  double e = 0.0;
  for (const auto& v : x) e += std::norm(v);
  return e;
}

Grid<Complex> rotated(const Grid<Complex>& g, double phase) {
  Grid<Complex> out(g);
  const Complex rot = std::polar(1.0, -phase);
  for (auto& v : out.data()) v *= rot;
  return out;
}

struct Candidate {
  double f = 0.0;
  double error = 0.0;
};

Candidate evaluate(std::span<const Complex> b, double f, std::int64_t d, const OfdmParams& ofdm,
                   double ts) {
  const ComplexVector shifted = apply_ambiguities(b, f, d, 0.0, ts);
  const Grid<Complex> g = demodulate_grid(shifted, ofdm);
  return {f, constellation_error(rotated(g, constellation_phase(g)))};
}

std::string flag(bool v) { return v ? "1" : "0"; }

}  // namespace

VectorFrameSource::VectorFrameSource(const std::vector<FrameSignal>& frames) : frames_(&frames) {}

std::size_t VectorFrameSource::frame_len() const {
  return frames_->empty() ? 0 : frames_->front().samples.size();
}

CaptureFrameSource::CaptureFrameSource(const CaptureReader& reader, std::size_t frame_len)
    : reader_(&reader), frame_len_(frame_len), count_(reader.frame_count(frame_len)) {
  if (frame_len == 0) throw ConfigError("frame length must be > 0");
}

SubsetFrameSource::SubsetFrameSource(const FrameSource& base, std::vector<std::size_t> positions)
    : base_(&base), positions_(std::move(positions)) {
  for (std::size_t p : positions_)
    if (p >= base.size()) throw ConfigError("frame subset position out of range");
}

void EstimatorConfig::validate() const {
  if (K < 1) throw ConfigError("estimator: K must be >= 1");
  if (!(threshold() > 0.0)) throw ConfigError("estimator: threshold must be > 0");
  if (threshold_mode == ThresholdMode::normalized && normalized_threshold > 1.0)
    throw ConfigError("estimator: normalized threshold must lie in (0, 1]");
  if (!(sample_rate_hz > 0.0)) throw ConfigError("estimator: sample_rate_hz must be > 0");
  grid.validate();
  kf.validate();
  if (init_policy == InitPolicy::provided_seed && seed.empty())
    throw ConfigError("estimator: provided_seed policy without a seed");
}

void EstimationTrace::write_kf_csv(const std::filesystem::path& path) const {
  CsvWriter out(path, {"k", "theta", "theta_dot", "theta_ddot", "residual_hz", "accepted"});
  for (const auto& r : rows)
    out.row(r.frame_index, r.theta, r.theta_dot, r.theta_ddot, r.residual_hz, r.accepted);
  out.close();
}

void EstimationTrace::write_csv(const std::filesystem::path& path) const {
  CsvWriter out(path, {"k", "delta_f_hz", "delta_phi_rad", "delta_d_samples", "peak",
                       "normalized_peak", "accepted"});
  for (const auto& r : rows)
    out.row(r.frame_index, r.delta_f_hz, r.delta_phi_rad, r.delta_d_samples, r.peak,
            r.normalized_peak, r.accepted);
  out.close();
}

std::optional<std::size_t> select_seed_frame(std::span<const double> e) {
  if (e.empty()) return std::nullopt;
  const auto [lo, hi] = std::minmax_element(e.begin(), e.end());
  if (!(*hi > 0.0)) return std::nullopt;
  if (*hi == *lo) return 0;
  const double mid = 0.5 * (*lo + *hi);
  for (std::size_t i = 0; i < e.size(); ++i)
    if (e[i] > mid) return i;
  return std::nullopt;
}

BeaconEstimate estimate_beacon(const FrameSource& frames, const EstimatorConfig& cfg,
                               EstimationTrace* trace) {
  cfg.validate();
  const std::size_t n = frames.frame_len();
  const std::size_t count = std::min(frames.size(), cfg.K);
  if (count == 0 || n == 0) throw ConfigError("estimate_beacon: no frames");
  const double ts = 1.0 / cfg.sample_rate_hz;

  BeaconEstimate est;
  std::size_t start = 0;
  std::int64_t prev_index = 0;
  if (cfg.init_policy == InitPolicy::provided_seed) {
    if (cfg.seed.size() != n)
      throw ConfigError("estimate_beacon: seed length " + std::to_string(cfg.seed.size()) +
                        " differs from frame length " + std::to_string(n));
    est.b_hat = cfg.seed;
    prev_index = static_cast<std::int64_t>(frames.frame(0).frame_index) - 1;
  } else {
    std::vector<double> e(count);
    for (std::size_t i = 0; i < count; ++i) e[i] = energy(frames.frame(i).samples);
    if (trace) trace->frame_energy = e;
    const auto seed = select_seed_frame(e);
    if (!seed) {
      // Nothing stands out (e.g. an all-zero capture): keep an empty seed.
      est.b_hat.assign(n, Complex{});
      est.total_frames_seen = count;
      return est;
    }
    const FrameSignal s = frames.frame(*seed);
    est.b_hat = s.samples;
    est.seed_frame_index = s.frame_index;
    prev_index = static_cast<std::int64_t>(s.frame_index);
    start = *seed + 1;
    est.total_frames_seen = 1;
  }
  if (trace) trace->seed_frame_index = est.seed_frame_index;

  TrackState state = cfg.kf.initial_state();
  for (std::size_t pos = start; pos < count; ++pos) {
    const FrameSignal f = frames.frame(pos);
    if (f.samples.size() != n) throw ConfigError("estimate_beacon: ragged frame lengths");
    const auto gap = std::max<std::int64_t>(1, static_cast<std::int64_t>(f.frame_index) - prev_index);
    KFConfig step = cfg.kf;
    step.frame_period_s *= static_cast<double>(gap);
    const TrackState prior = predict(state, step);
    const ComplexVector wiped = wipe_off(f.samples, prior, ts);
    const CorrelationResult c =
        BeaconCorrelator(est.b_hat).correlate(wiped, cfg.grid, ts, cfg.correlate);
    const double score = cfg.threshold_mode == ThresholdMode::normalized ? c.normalized_peak : c.peak;
    const bool accept = !c.degenerate && score >= cfg.threshold();

    TraceRow row;
    row.frame_index = f.frame_index;
    row.delta_f_hz = c.delta_f_hz;
    row.delta_phi_rad = c.delta_phi_rad;
    row.delta_d_samples = c.delta_d_samples;
    row.peak = c.peak;
    row.normalized_peak = c.normalized_peak;
    row.accepted = accept;

    if (accept) {
      const UpdateResult u = update_detailed(prior, c.delta_f_hz, cfg.kf);
      state = u.state;
      row.residual_hz = u.innovation / kTwoPi;

      ComplexVector aligned = circshift(est.b_hat, static_cast<std::int64_t>(c.delta_d_samples));
      const Complex rot = std::polar(1.0, c.delta_phi_rad);
      double diff = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        aligned[i] *= rot;
        diff += std::norm(aligned[i] - wiped[i]);
      }
      const double we = energy(wiped);
      row.alignment_residual = we > 0.0 ? std::sqrt(diff / we) : 0.0;

      const auto k = static_cast<double>(est.accepted_count);
      for (std::size_t i = 0; i < n; ++i) est.b_hat[i] = (k * aligned[i] + wiped[i]) / (k + 1.0);
      ++est.accepted_count;
    } else {
      state = prior;
    }
    row.theta = state.x(0);
    row.theta_dot = state.x(1);
    row.theta_ddot = state.x(2);
    if (trace) trace->rows.push_back(row);

    prev_index = static_cast<std::int64_t>(f.frame_index);
    est.last_frame_index = f.frame_index;
    ++est.total_frames_seen;
  }
  est.last_state = state;
  return est;
}

BeaconEstimate estimate_beacon(const std::vector<FrameSignal>& frames, const EstimatorConfig& cfg,
                               EstimationTrace* trace) {
  return estimate_beacon(VectorFrameSource(frames), cfg, trace);
}

ResolveAids aids_from_spec(const BeaconSpec& spec, double sample_rate_hz) {
  ResolveAids aids;
  aids.ofdm = spec.ofdm();
  aids.sample_rate_hz = sample_rate_hz;
  aids.sync_reference = spec.sync_preamble;
  if (!spec.sync_symbols.empty()) {
    // Known sync rows, modulated in place behind the preamble.
    Grid<Complex> sync(spec.n_ofdm_symbols, spec.n_subcarriers);
    std::size_t last = 0;
    for (std::size_t r : spec.sync_symbols) {
      for (std::size_t c = 0; c < spec.n_subcarriers; ++c) sync(r, c) = spec.pilot_symbols(r, c);
      last = std::max(last, r);
    }
    const ComplexVector wave = ofdm_modulate(sync, spec.ofdm());
    const std::size_t len = (last + 1) * spec.ofdm().symbol_len();
    aids.sync_reference.insert(aids.sync_reference.end(), wave.begin(),
                               wave.begin() + static_cast<std::ptrdiff_t>(len));
  }
  return aids;
}

BeaconEstimate resolve_ambiguities(const BeaconEstimate& est, const ResolveAids& aids,
                                   const FrequencyGrid& grid_coarse) {
  grid_coarse.validate();
  if (!(aids.sample_rate_hz > 0.0)) throw ConfigError("resolve_ambiguities: sample rate must be > 0");
  BeaconEstimate out = est;
  out.ambiguities = Ambiguities{};
  if (est.accepted_count == 0) return out;

  const std::size_t n = est.b_hat.size();
  const double ts = 1.0 / aids.sample_rate_hz;
  Ambiguities& a = out.ambiguities;

  FrequencyGrid search = grid_coarse;
  double f_center = 0.0;
  if (aids.ephemeris) {
    const auto& e = *aids.ephemeris;
    const StateVector sv = e.ephemeris.interpolate(e.t_last_frame);
    f_center = predicted_doppler(sv, e.rx_position_ecef_m, Vec3::Zero(), e.carrier_hz) -
               est.last_state.x(1) / kTwoPi;
    search = FrequencyGrid::centered(f_center, 2.0 * grid_coarse.f_step, grid_coarse.f_step);
  }
  a.f_DK_hz = f_center;
  a.f_resolved = aids.ephemeris.has_value();

  ComplexVector reference;
  if (!aids.sync_reference.empty()) {
    if (aids.sync_reference.size() > n)
      throw ConfigError("resolve_ambiguities: sync reference longer than the frame");
    reference = aids.sync_reference;
    reference.resize(n);
    const CorrelationResult c = correlate(reference, est.b_hat, search, ts);
    if (!c.degenerate) {
      a.f_DK_hz = c.delta_f_hz;
      a.d_K_samples = static_cast<std::int64_t>(c.delta_d_samples);
      a.theta_K_rad = c.delta_phi_rad;
      a.d_resolved = true;
      a.theta_resolved = true;
    }
  }
  if (!a.d_resolved) return out;

  if (aids.ofdm.n_subcarriers > 0) {
    a.f_resolved = false;
    const double step = search.f_step;
    const double fine = step / static_cast<double>(std::max<std::size_t>(1, aids.fine_steps));
    std::vector<Candidate> pass;
    const auto steps = static_cast<std::int64_t>(std::max<std::size_t>(1, aids.fine_steps));
    for (std::int64_t i = -steps; i <= steps; ++i)
      pass.push_back(evaluate(est.b_hat, a.f_DK_hz + static_cast<double>(i) * fine, a.d_K_samples,
                              aids.ofdm, ts));
    const auto cmp = [](const Candidate& x, const Candidate& y) { return x.error < y.error; };
    Candidate best = *std::min_element(pass.begin(), pass.end(), cmp);

    std::vector<double> errs;
    for (const auto& c : pass) errs.push_back(c.error);
    std::nth_element(errs.begin(), errs.begin() + static_cast<std::ptrdiff_t>(errs.size() / 2), errs.end());
    const double median = errs[errs.size() / 2];
    const bool flat = !(median > 0.0) || (median - best.error) / median < aids.flat_tolerance;

    const double center = best.f;
    for (int i = -10; i <= 10; ++i) {
      const Candidate c = evaluate(est.b_hat, center + i * fine / 10.0, a.d_K_samples, aids.ofdm, ts);
      if (c.error < best.error) best = c;
    }
    a.f_DK_hz = best.f;
    a.constellation_error = best.error;
    a.f_resolved = !flat;

    // Constant phase from the sync reference at the final frequency.
    const CorrelationResult c = correlate(reference, est.b_hat, FrequencyGrid::single(best.f), ts);
    a.theta_K_rad = c.delta_phi_rad;
    a.d_K_samples = static_cast<std::int64_t>(c.delta_d_samples);
  }

  out.b_hat = apply_ambiguities(est.b_hat, a.f_DK_hz, a.d_K_samples, a.theta_K_rad, ts);
  out.ambiguities_applied = true;
  return out;
}

ComplexVector circshift(std::span<const Complex> x, std::int64_t shift) {
  const auto n = static_cast<std::int64_t>(x.size());
  ComplexVector out(x.size());
  if (n == 0) return out;
  const std::int64_t s = ((shift % n) + n) % n;
  for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>((i + s) % n)] = x[static_cast<std::size_t>(i)];
  return out;
}

ComplexVector apply_ambiguities(std::span<const Complex> b, double f_hz, std::int64_t d,
                                double theta, double ts) {
  ComplexVector y(b.begin(), b.end());
  for (std::size_t m = 0; m < y.size(); ++m)
    y[m] *= std::polar(1.0, -kTwoPi * f_hz * static_cast<double>(m) * ts - theta);
  return circshift(y, -d);
}

Grid<Complex> demodulate_grid(std::span<const Complex> b_hat, const OfdmParams& params,
                              std::ptrdiff_t cp_offset) {
  params.validate();
  if (b_hat.size() < params.total_len())
    throw ConfigError("demodulate_grid: beacon has " + std::to_string(b_hat.size()) +
                      " samples, layout needs " + std::to_string(params.total_len()));
  return ofdm_demodulate(b_hat, params, cp_offset);
}

double strong_cell_rms(const Grid<Complex>& grid) {
  if (grid.size() == 0) return 0.0;
  double mean = 0.0;
  for (const auto& v : grid.data()) mean += std::norm(v);
  mean /= static_cast<double>(grid.size());
  if (!(mean > 0.0)) return 0.0;
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& v : grid.data())
    if (std::norm(v) >= mean) {
      acc += std::norm(v);
      ++count;
    }
  return std::sqrt(acc / static_cast<double>(count));
}

double constellation_error(const Grid<Complex>& grid) {
  const double s = strong_cell_rms(grid);
  if (!(s > 0.0)) return 0.0;
  static const Complex points[] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {0, 0}};
  double acc = 0.0;
  for (const auto& v : grid.data()) {
    const Complex u = v / s;
    double best = std::norm(u);
    for (const auto& p : points) best = std::min(best, std::norm(u - p));
    acc += best;
  }
  return acc / static_cast<double>(grid.size());
}

double constellation_phase(const Grid<Complex>& grid) {
  double mean = 0.0;
  for (const auto& v : grid.data()) mean += std::norm(v);
  if (grid.size() == 0 || !(mean > 0.0)) return 0.0;
  mean /= static_cast<double>(grid.size());
  Complex acc{};
  for (const auto& v : grid.data())
    if (std::norm(v) >= mean) {
      const Complex u = v / std::abs(v);
      acc += u * u * u * u;
    }
  return std::arg(acc) / 4.0;
}

PilotGrid classify_pilots(const Grid<Complex>& grid, double threshold, double normalization) {
  if (!(normalization > 0.0)) throw ConfigError("classify_pilots: normalization must be > 0");
  PilotGrid out;
  out.symbols = grid;
  out.mask = Grid<bool>(grid.rows(), grid.cols(), false);
  std::size_t pilots = 0;
  for (std::size_t r = 0; r < grid.rows(); ++r)
    for (std::size_t c = 0; c < grid.cols(); ++c)
      if (std::abs(grid(r, c)) / normalization > threshold) {
        out.mask(r, c) = true;
        ++pilots;
      }
  out.pilot_fraction = grid.size() == 0 ? 0.0 : static_cast<double>(pilots) / static_cast<double>(grid.size());
  return out;
}

PilotGrid classify_pilots(const Grid<Complex>& grid, double threshold, double normalization,
                          const BeaconSpec& layout) {
  PilotGrid out = classify_pilots(grid, threshold, normalization);
  if (grid.rows() != layout.n_ofdm_symbols || grid.cols() != layout.n_subcarriers)
    throw ConfigError("classify_pilots: grid shape does not match the layout");
  out.pilot_fraction = pilot_fraction(out.mask, layout);
  return out;
}

std::vector<std::size_t> elevation_prefilter(std::span<const double> frame_times,
                                             const std::vector<EphemerisTable>& ephemerides,
                                             const Vec3& rx, double mask_rad) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < frame_times.size(); ++i) {
    for (const auto& e : ephemerides) {
      if (!e.covers(frame_times[i])) continue;
      if (elevation(rx, e.interpolate(frame_times[i]).position_ecef_m) >= mask_rad) {
        keep.push_back(i);
        break;
      }
    }
  }
  return keep;
}

void save_beacon(const std::filesystem::path& path, const BeaconEstimate& est,
                 double sample_rate_hz, double carrier_hz, const std::string& config_hash) {
  double peak = 0.0;
  for (const auto& v : est.b_hat) peak = std::max({peak, std::abs(v.real()), std::abs(v.imag())});
  CaptureMeta meta;
  meta.sample_rate_hz = sample_rate_hz;
  meta.center_freq_hz = carrier_hz;
  meta.sample_count = est.b_hat.size();
  const auto& a = est.ambiguities;
  meta.extra["frame_len"] = std::to_string(est.b_hat.size());
  meta.extra["accepted_count"] = std::to_string(est.accepted_count);
  meta.extra["total_frames_seen"] = std::to_string(est.total_frames_seen);
  meta.extra["f_DK_hz"] = format_double(a.f_DK_hz);
  meta.extra["theta_K_rad"] = format_double(a.theta_K_rad);
  meta.extra["d_K_samples"] = std::to_string(a.d_K_samples);
  meta.extra["f_resolved"] = flag(a.f_resolved);
  meta.extra["d_resolved"] = flag(a.d_resolved);
  meta.extra["theta_resolved"] = flag(a.theta_resolved);
  meta.extra["ambiguities_applied"] = flag(est.ambiguities_applied);
  meta.extra["constellation_error"] = format_double(a.constellation_error);
  meta.extra["last_frame_index"] = std::to_string(est.last_frame_index);
  if (est.seed_frame_index) meta.extra["seed_frame_index"] = std::to_string(*est.seed_frame_index);
  if (!config_hash.empty()) meta.extra["estimator_config_hash"] = config_hash;
  WriteOptions opts;
  opts.gain = peak > 0.0 ? 30000.0 / peak : 1.0;
  write_capture(path, meta, est.b_hat, opts);
}

BeaconEstimate load_beacon(const std::filesystem::path& path, CaptureMeta* meta_out) {
  CaptureReader reader(path);
  const CaptureMeta& meta = reader.meta();
  BeaconEstimate est;
  est.b_hat = reader.read_samples(0, static_cast<std::size_t>(meta.sample_count));
  const auto get = [&](const std::string& key) -> std::string {
    const auto it = meta.extra.find(key);
    return it == meta.extra.end() ? std::string{} : it->second;
  };
  const auto num = [&](const std::string& key) {
    const std::string v = get(key);
    return v.empty() ? 0.0 : parse_double(v, sidecar_path(path), 0);
  };
  est.accepted_count = static_cast<std::size_t>(num("accepted_count"));
  est.total_frames_seen = static_cast<std::size_t>(num("total_frames_seen"));
  est.last_frame_index = static_cast<std::uint64_t>(num("last_frame_index"));
  est.ambiguities.f_DK_hz = num("f_DK_hz");
  est.ambiguities.theta_K_rad = num("theta_K_rad");
  est.ambiguities.d_K_samples = static_cast<std::int64_t>(num("d_K_samples"));
  est.ambiguities.constellation_error = num("constellation_error");
  est.ambiguities.f_resolved = get("f_resolved") == "1";
  est.ambiguities.d_resolved = get("d_resolved") == "1";
  est.ambiguities.theta_resolved = get("theta_resolved") == "1";
  est.ambiguities_applied = get("ambiguities_applied") == "1";
  if (!get("seed_frame_index").empty())
    est.seed_frame_index = static_cast<std::uint64_t>(num("seed_frame_index"));
  if (meta_out) *meta_out = meta;
  return est;
}

double normalized_correlation(std::span<const Complex> a, std::span<const Complex> b) {
  if (a.size() != b.size()) throw ConfigError("normalized_correlation: length mismatch");
  Complex dot{};
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * std::conj(b[i]);
  const double na = std::sqrt(energy(a));
  const double nb = std::sqrt(energy(b));
  return na > 0.0 && nb > 0.0 ? std::abs(dot) / (na * nb) : 0.0;
}

}  // namespace leosop
