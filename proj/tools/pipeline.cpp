#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "leosop/constants.hpp"
#include "leosop/csv.hpp"

namespace leosop::pipeline {
namespace {

using json = nlohmann::json;

constexpr double kDeg = kPi / 180.0;

// JSON object view that remembers which keys were read, so leftovers can be
// reported as unknown.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return nullptr;
    return &j_.at(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + ": unexpected type " + std::string(j_.at(key).type_name()));
    }
  }

  template <typename T>
  std::optional<T> optional(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
    return get<T>(key, T{});
  }

  std::optional<Node> child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
    return Node(j_.at(key), where(key));
  }

  std::vector<Node> array(const std::string& key) {
    seen_.insert(key);
    std::vector<Node> out;
    if (!j_.contains(key)) return out;
    const json& a = j_.at(key);
    if (!a.is_array()) throw ConfigError(where(key) + ": expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) out.emplace_back(a[i], where(key) + "[" + std::to_string(i) + "]");
    return out;
  }

  Vec3 vec3(const std::string& key, const Vec3& fallback) {
    const auto v = get<std::vector<double>>(key, {fallback.x(), fallback.y(), fallback.z()});
    if (v.size() != 3) throw ConfigError(where(key) + ": expected 3 numbers");
    return {v[0], v[1], v[2]};
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(where(key) + ": unknown key");
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

FrequencyGrid read_grid(Node n, const FrequencyGrid& fallback) {
  FrequencyGrid g{n.get("f_min", fallback.f_min), n.get("f_max", fallback.f_max),
                  n.get("f_step", fallback.f_step)};
  n.finish();
  try {
    g.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(n.where() + ": " + e.what());
  }
  return g;
}

DataFill read_fill(const std::string& s, const std::string& where) {
  if (s == "random_qpsk") return DataFill::random_qpsk;
  if (s == "silent") return DataFill::silent;
  throw ConfigError(where + ": data_fill must be random_qpsk or silent");
}

CaptureSpec read_capture(Node n) {
  CaptureSpec c;
  c.enabled = true;
  c.start_time = n.get("start_time", 0.0);
  c.frames = n.get<std::size_t>("frames", 10);
  c.stride = n.get<std::size_t>("stride", 1);
  c.snr_db = n.optional<double>("snr_db");
  c.data_fill = read_fill(n.get<std::string>("data_fill", "random_qpsk"), n.where("data_fill"));
  if (auto d = n.child("duty_cycle")) {
    const auto mode = d->get<std::string>("mode", "highest_elevation");
    if (mode == "highest_elevation") c.duty_cycle.mode = DutyCycle::Mode::highest_elevation;
    else if (mode == "round_robin") c.duty_cycle.mode = DutyCycle::Mode::round_robin;
    else if (mode == "fixed") c.duty_cycle.mode = DutyCycle::Mode::fixed;
    else if (mode == "silent") c.duty_cycle.mode = DutyCycle::Mode::silent;
    else throw ConfigError(d->where("mode") + ": unknown duty cycle mode '" + mode + "'");
    c.duty_cycle.sv_id = d->get<std::string>("sv_id", "");
    c.duty_cycle.active_fraction = d->get("active_fraction", 1.0);
    c.duty_cycle.elevation_mask_deg = d->get("elevation_mask_deg", 10.0);
    d->finish();
  }
  if (auto f = n.child("fixed_dynamics")) {
    FixedDynamics fd;
    fd.f_d_hz = f->get("f_d_hz", 0.0);
    fd.f_d_rate_hz_s = f->get("f_d_rate_hz_s", 0.0);
    fd.theta_rad = f->get("theta_rad", 0.0);
    fd.d_samples = f->get<std::int64_t>("d_samples", 0);
    fd.sv_id = f->get<std::string>("sv_id", "SIM");
    f->finish();
    c.fixed_dynamics = fd;
  }
  n.finish();
  if (c.frames < 1) throw ConfigError(n.where("frames") + ": must be >= 1");
  if (c.stride < 1) throw ConfigError(n.where("stride") + ": must be >= 1");
  return c;
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(std::min(byte, text.size())), '\n'));
}

std::string fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::string estimator_hash(const PipelineConfig& cfg) {
  const auto& e = cfg.estimator;
  std::ostringstream os;
  os << e.K << '|' << static_cast<int>(e.threshold_mode) << '|' << format_double(e.threshold()) << '|'
     << format_double(e.grid.f_min) << ',' << format_double(e.grid.f_max) << ',' << format_double(e.grid.f_step)
     << '|' << format_double(e.kf.q_w) << '|' << format_double(e.kf.R) << '|' << format_double(e.kf.sigma0(0))
     << ',' << format_double(e.kf.sigma0(1)) << ',' << format_double(e.kf.sigma0(2));
  return fnv1a(os.str());
}

Vec3 enu_to_ecef(const Vec3& origin, const Vec3& enu) {
  const Vec3 up = origin.normalized();
  Vec3 east = Vec3::UnitZ().cross(up);
  if (east.norm() < 1e-12) east = Vec3::UnitX();
  east.normalize();
  const Vec3 north = up.cross(east);
  return origin + east * enu.x() + north * enu.y() + up * enu.z();
}

void log(const RunOptions& o, const std::string& msg) {
  if (o.verbose) std::cerr << "[leosop] " << msg << '\n';
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

std::size_t meta_size(const CaptureMeta& meta, const std::string& key, std::size_t fallback) {
  const auto it = meta.extra.find(key);
  if (it == meta.extra.end()) return fallback;
  return static_cast<std::size_t>(std::stoull(it->second));
}

void require(const std::filesystem::path& p, const std::string& producer) {
  if (!std::filesystem::exists(p))
    throw IoError("missing input " + p.string() + " (run `leosop " + producer + "` first)");
}

double frame_time(const CaptureMeta& meta, std::size_t frame_len, std::size_t stride, std::uint64_t k) {
  return meta.start_time_utc +
         static_cast<double>(k * stride) * static_cast<double>(frame_len) / meta.sample_rate_hz;
}

void write_simulated(const SyntheticCapture& cap, const std::filesystem::path& data,
                     const std::filesystem::path& truth) {
  WriteOptions w;
  w.clip_tolerance = 1e-4;
  write_capture(data, cap.meta, cap.concatenated(), w);
  cap.truth.write_csv(truth);
}

}  // namespace

Vec3 PipelineConfig::rx_position() const {
  return geodetic_to_ecef(lat_deg * kDeg, lon_deg * kDeg, height_m);
}

Vec3 PipelineConfig::assumed_rx_position() const {
  return enu_to_ecef(rx_position(), assumed_offset_enu_m);
}

std::vector<OrbitSpec> PipelineConfig::all_orbits() const {
  std::vector<OrbitSpec> out = orbits;
  const Vec3 rx = rx_position();
  for (const auto& p : passes) {
    const Vec3 ground = enu_to_ecef(rx, {p.ground_offset_east_km * 1e3, p.ground_offset_north_km * 1e3, 0.0});
    out.push_back(orbit_through(p.sv_id, kEarthRadius + p.altitude_m, p.inclination_deg * kDeg, ground,
                                p.pass_time_s, p.ascending));
  }
  return out;
}

BeaconSpec PipelineConfig::beacon_spec() const {
  if (beacon_preset == "desk") return desk_beacon_spec(beacon_seed);
  if (beacon_preset == "starlink_like") return starlink_like_beacon_spec(beacon_seed);
  throw ConfigError("beacon.preset: unknown preset '" + beacon_preset + "'");
}

ScenarioConfig PipelineConfig::scenario(const CaptureSpec& c, std::uint64_t s) const {
  ScenarioConfig sc;
  sc.rx_position_ecef_m = rx_position();
  sc.orbits = all_orbits();
  sc.K_frames = c.frames;
  sc.frame_stride = c.stride;
  sc.start_time = c.start_time;
  sc.snr_db = c.snr_db;
  sc.duty_cycle = c.duty_cycle;
  sc.data_fill = c.data_fill;
  sc.clock = clock;
  sc.carrier_hz = carrier_hz;
  sc.sample_rate_hz = sample_rate_hz;
  sc.beacon_rms = beacon_rms;
  sc.fixed_dynamics = c.fixed_dynamics;
  sc.seed = s;
  return sc;
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t line = line_of(text, e.byte);
    throw ConfigError(source.string() + ":" + std::to_string(line) + ": " + e.what());
  }
  PipelineConfig cfg;
  cfg.source = source;
  try {
    Node root(j, "");
    cfg.seed = root.get<std::uint64_t>("seed", 1);
    cfg.carrier_hz = root.get("carrier_hz", cfg.carrier_hz);
    cfg.sample_rate_hz = root.get("sample_rate_hz", cfg.sample_rate_hz);
    cfg.beacon_rms = root.get("beacon_rms", cfg.beacon_rms);
    if (auto b = root.child("beacon")) {
      cfg.beacon_preset = b->get<std::string>("preset", "desk");
      cfg.beacon_seed = b->get<std::uint64_t>("seed", 1);
      b->finish();
    }
    if (auto r = root.child("receiver")) {
      cfg.lat_deg = r->get("lat_deg", cfg.lat_deg);
      cfg.lon_deg = r->get("lon_deg", cfg.lon_deg);
      cfg.height_m = r->get("height_m", cfg.height_m);
      cfg.assumed_offset_enu_m = r->vec3("assumed_offset_enu_m", Vec3::Zero());
      r->finish();
    }
    if (auto c = root.child("clock")) {
      cfg.clock.bias_s = c->get("bias_s", 0.0);
      cfg.clock.drift = c->get("drift", 0.0);
      c->finish();
    }
    for (auto p : root.array("passes")) {
      PassSpec s;
      s.sv_id = p.get<std::string>("sv_id", "");
      if (s.sv_id.empty()) throw ConfigError(p.where("sv_id") + ": required");
      s.altitude_m = p.get("altitude_m", s.altitude_m);
      s.inclination_deg = p.get("inclination_deg", s.inclination_deg);
      s.pass_time_s = p.get("pass_time_s", 0.0);
      s.ground_offset_east_km = p.get("ground_offset_east_km", 0.0);
      s.ground_offset_north_km = p.get("ground_offset_north_km", 0.0);
      s.ascending = p.get("ascending", true);
      p.finish();
      cfg.passes.push_back(s);
    }
    for (auto o : root.array("orbits")) {
      OrbitSpec s;
      s.sv_id = o.get<std::string>("sv_id", "");
      if (s.sv_id.empty()) throw ConfigError(o.where("sv_id") + ": required");
      s.semi_major_axis_m = kEarthRadius + o.get("altitude_m", 550e3);
      s.inclination_rad = o.get("inclination_deg", 53.0) * kDeg;
      s.raan_rad = o.get("raan_deg", 0.0) * kDeg;
      s.arg_latitude_epoch_rad = o.get("arg_latitude_deg", 0.0) * kDeg;
      s.epoch = o.get("epoch", 0.0);
      o.finish();
      cfg.orbits.push_back(s);
    }
    if (auto c = root.child("estimation_capture")) cfg.estimation = read_capture(*c);
    if (auto c = root.child("acquisition_capture")) cfg.acquisition_capture = read_capture(*c);
    if (auto e = root.child("ephemeris")) {
      cfg.ephemeris_step_s = e->get("step_s", cfg.ephemeris_step_s);
      cfg.ephemeris_margin_s = e->get("margin_s", cfg.ephemeris_margin_s);
      e->finish();
    }
    if (auto e = root.child("estimator")) {
      auto& ec = cfg.estimator;
      ec.K = e->get<std::size_t>("K", ec.K);
      const auto mode = e->get<std::string>("threshold_mode", "normalized");
      if (mode == "normalized") ec.threshold_mode = ThresholdMode::normalized;
      else if (mode == "absolute") ec.threshold_mode = ThresholdMode::absolute;
      else throw ConfigError(e->where("threshold_mode") + ": must be normalized or absolute");
      if (auto t = e->optional<double>("threshold")) {
        if (ec.threshold_mode == ThresholdMode::normalized) ec.normalized_threshold = *t;
        else ec.absolute_threshold = *t;
      }
      if (auto g = e->child("grid")) ec.grid = read_grid(*g, ec.grid);
      if (auto k = e->child("kf")) {
        ec.kf.q_w = k->get("q_w", ec.kf.q_w);
        ec.kf.R = k->get("R", ec.kf.R);
        ec.kf.sigma0 = k->vec3("sigma0", ec.kf.sigma0);
        ec.kf.x0 = k->vec3("x0", ec.kf.x0);
        k->finish();
      }
      if (auto g = e->child("coarse_grid")) cfg.coarse_grid = read_grid(*g, cfg.coarse_grid);
      cfg.use_ephemeris_aid = e->get("use_ephemeris_aid", cfg.use_ephemeris_aid);
      cfg.pilot_threshold = e->get("pilot_threshold", cfg.pilot_threshold);
      if (const json* pn = e->raw("pilot_normalization")) {
        if (pn->is_number()) cfg.pilot_normalization = pn->get<double>();
        else if (pn->is_string() && pn->get<std::string>() == "auto") cfg.pilot_normalization.reset();
        else throw ConfigError(e->where("pilot_normalization") + ": expected a number or \"auto\"");
      }
      e->finish();
    }
    if (auto a = root.child("acquisition")) {
      auto& ac = cfg.acquisition;
      ac.cadence_s = a->get("cadence_s", ac.cadence_s);
      if (auto g = a->child("wide_grid")) ac.wide_grid = read_grid(*g, ac.wide_grid);
      ac.hierarchical = a->get("hierarchical", ac.hierarchical);
      ac.coarse_step_hz = a->get("coarse_step_hz", ac.coarse_step_hz);
      ac.fine_half_span_hz = a->get("fine_half_span_hz", ac.fine_half_span_hz);
      ac.gate = a->get("gate", ac.gate);
      ac.threads = a->get("threads", ac.threads);
      cfg.association.gate_hz = a->get("association_gate_hz", cfg.association.gate_hz);
      cfg.association.margin_hz = a->get("association_margin_hz", 2.0 * cfg.association.gate_hz);
      cfg.association.elevation_mask_rad = a->get("elevation_mask_deg", 0.0) * kDeg;
      a->finish();
    }
    if (auto n = root.child("nav")) {
      auto& nc = cfg.nav;
      const auto mode = n->get<std::string>("mode", "static");
      if (mode == "static") nc.mode = NavMode::static_rx;
      else if (mode == "full") nc.mode = NavMode::full;
      else throw ConfigError(n->where("mode") + ": must be static or full");
      nc.epsilon = n->get("epsilon", nc.epsilon);
      nc.max_iters = n->get("max_iters", nc.max_iters);
      nc.lambda = n->get("lambda", nc.lambda);
      cfg.lambda_sweep = n->get("lambda_sweep", cfg.lambda_sweep);
      cfg.initial_offset_enu_m = n->vec3("initial_offset_enu_m", cfg.initial_offset_enu_m);
      n->finish();
    }
    root.finish();
  } catch (const ConfigError& e) {
    throw ConfigError(source.string() + ": " + e.what());
  }

  cfg.association.carrier_hz = cfg.carrier_hz;
  cfg.estimator.sample_rate_hz = cfg.sample_rate_hz;
  const auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      throw ConfigError(source.string() + ": " + e.what());
    }
  };
  check([&] { cfg.estimator.validate(); });
  check([&] { cfg.acquisition.validate(); });
  check([&] { cfg.nav.validate(); });
  check([&] { (void)cfg.beacon_spec(); });
  check([&] { for (const auto& o : cfg.all_orbits()) o.validate(); });
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::vector<EphemerisTable> load_ephemerides(const Layout& layout) {
  std::vector<EphemerisTable> out;
  if (!std::filesystem::exists(layout.ephemeris_dir())) return out;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(layout.ephemeris_dir()))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out.push_back(EphemerisTable::import_csv(f, f.stem().string()));
  return out;
}

SimulateSummary run_simulate(const PipelineConfig& cfg, const RunOptions& opts) {
  const Layout layout{opts.out_dir};
  std::filesystem::create_directories(layout.dir);
  const BeaconSpec spec = cfg.beacon_spec();
  const ComplexVector beacon = build_beacon(spec);
  const double t_fr = static_cast<double>(spec.frame_len) / cfg.sample_rate_hz;

  SimulateSummary summary;
  double t_lo = 0.0;
  double t_hi = 0.0;
  bool any = false;
  const auto one = [&](const CaptureSpec& c, std::uint64_t seed, const std::filesystem::path& data,
                       const std::filesystem::path& truth, const char* label) {
    const SyntheticCapture cap = synthesize_capture(cfg.scenario(c, seed), spec, beacon);
    write_simulated(cap, data, truth);
    const std::size_t active = cap.truth.active_count();
    summary.frames += cap.truth.frames.size();
    summary.active += active;
    std::cout << label << ": " << cap.truth.frames.size() << " frames of " << spec.frame_len
              << " samples, active fraction "
              << static_cast<double>(active) / static_cast<double>(cap.truth.frames.size()) << ", SNR "
              << (c.snr_db ? format_double(*c.snr_db) + " dB" : std::string("noise-free")) << '\n';
    if (active == 0) {
      summary.warnings.push_back(std::string(label) + ": every frame is inactive");
      warn(summary.warnings.back());
    }
    const double t0 = c.start_time;
    const double t1 = c.start_time + static_cast<double>(c.frames * c.stride) * t_fr;
    t_lo = any ? std::min(t_lo, t0) : t0;
    t_hi = any ? std::max(t_hi, t1) : t1;
    any = true;
  };
  if (cfg.estimation.enabled)
    one(cfg.estimation, cfg.seed, layout.estimation_capture(), layout.estimation_truth(), "estimation capture");
  if (cfg.acquisition_capture.enabled)
    one(cfg.acquisition_capture, cfg.seed + 1, layout.acquisition_capture(), layout.acquisition_truth(),
        "acquisition capture");
  if (!any) throw ConfigError(cfg.source.string() + ": no estimation_capture or acquisition_capture section");

  const auto orbits = cfg.all_orbits();
  if (!orbits.empty()) {
    std::filesystem::create_directories(layout.ephemeris_dir());
    for (const auto& o : orbits)
      EphemerisTable::sample(o, t_lo - cfg.ephemeris_margin_s, t_hi + cfg.ephemeris_margin_s, cfg.ephemeris_step_s)
          .export_csv(layout.ephemeris_dir() / (o.sv_id + ".csv"));
  }
  log(opts, "simulation written to " + layout.dir.string());
  return summary;
}

BeaconEstimate run_estimate_beacon(const PipelineConfig& cfg, const RunOptions& opts) {
  const Layout layout{opts.out_dir};
  require(layout.estimation_capture(), "simulate");
  const CaptureReader reader(layout.estimation_capture());
  const CaptureMeta& meta = reader.meta();
  const BeaconSpec spec = cfg.beacon_spec();
  const std::size_t frame_len = meta_size(meta, "frame_len", spec.frame_len);
  const std::size_t stride = meta_size(meta, "frame_stride", 1);
  if (frame_len != spec.frame_len)
    throw ConfigError("capture frame length " + std::to_string(frame_len) + " does not match beacon preset (" +
                      std::to_string(spec.frame_len) + ")");

  EstimatorConfig ecfg = cfg.estimator;
  ecfg.sample_rate_hz = meta.sample_rate_hz;
  ecfg.kf.frame_period_s = static_cast<double>(frame_len * stride) / meta.sample_rate_hz;
  const CaptureFrameSource source(reader, frame_len);
  EstimationTrace trace;
  const BeaconEstimate est = estimate_beacon(source, ecfg, &trace);
  trace.write_csv(layout.beacon_trace());
  trace.write_kf_csv(layout.kf_trace());
  {
    CsvWriter pd(layout.phase_diff(), {"k", "delta_phi_rad", "accepted"});
    for (const auto& r : trace.rows) pd.row(r.frame_index, r.delta_phi_rad, r.accepted);
    pd.close();
  }
  log(opts, "accepted " + std::to_string(est.accepted_count) + " of " + std::to_string(est.total_frames_seen) + " frames");

  ResolveAids aids = aids_from_spec(spec, meta.sample_rate_hz);
  const auto eph = load_ephemerides(layout);
  if (cfg.use_ephemeris_aid && !eph.empty() && est.accepted_count > 0) {
    const double t_last = frame_time(meta, frame_len, stride, est.last_frame_index);
    const Vec3 rx = cfg.assumed_rx_position();
    const EphemerisTable* best = nullptr;
    double best_el = -kPi;
    for (const auto& e : eph) {
      if (!e.covers(t_last)) continue;
      const double el = elevation(rx, e.interpolate(t_last).position_ecef_m);
      if (el > best_el) {
        best_el = el;
        best = &e;
      }
    }
    if (best) aids.ephemeris = EphemerisAid{*best, rx, meta.center_freq_hz, t_last};
  }
  const BeaconEstimate res = resolve_ambiguities(est, aids, cfg.coarse_grid);
  save_beacon(layout.beacon(), res, meta.sample_rate_hz, meta.center_freq_hz, estimator_hash(cfg));

  const auto& a = res.ambiguities;
  std::cout << "accepted frames: " << res.accepted_count << " / " << res.total_frames_seen << '\n';
  std::cout << "ambiguities: f_DK = " << format_double(a.f_DK_hz) << " Hz, theta_K = " << format_double(a.theta_K_rad)
            << " rad, d_K = " << a.d_K_samples << " samples\n";

  if (res.ambiguities_applied) {
    const Grid<Complex> grid = demodulate_grid(res.b_hat, spec.ofdm());
    const double norm = cfg.pilot_normalization.value_or(strong_cell_rms(grid));
    const PilotGrid pilots = classify_pilots(grid, cfg.pilot_threshold, norm > 0.0 ? norm : 1.0, spec);
    CsvWriter out(layout.pilot_grid(), {"symbol", "subcarrier", "re", "im", "magnitude", "pilot"});
    for (std::size_t r = 0; r < grid.rows(); ++r)
      for (std::size_t c = 0; c < grid.cols(); ++c)
        out.row(r, subcarrier_of_column(c, grid.cols()), grid(r, c).real() / norm, grid(r, c).imag() / norm,
                std::abs(grid(r, c)) / norm, static_cast<bool>(pilots.mask(r, c)));
    out.close();
    std::cout << "pilot fraction: " << format_double(pilots.pilot_fraction) << '\n';
  }
  if (!res.resolved())
    throw UnresolvedBeaconError("beacon ambiguities unresolved (accepted " + std::to_string(res.accepted_count) +
                                " frames)");
  return res;
}

std::vector<DopplerMeasurement> run_acquire(const PipelineConfig& cfg, const RunOptions& opts) {
  const Layout layout{opts.out_dir};
  require(layout.beacon(), "estimate-beacon");
  require(layout.acquisition_capture(), "simulate");
  const BeaconEstimate beacon = load_beacon(layout.beacon());
  if (!beacon.resolved()) throw UnresolvedBeaconError("stored beacon is unresolved");
  const CaptureReader reader(layout.acquisition_capture());
  const CaptureMeta& meta = reader.meta();
  const std::size_t frame_len = meta_size(meta, "frame_len", beacon.b_hat.size());
  const std::size_t stride = meta_size(meta, "frame_stride", 1);
  const CaptureFrameSource source(reader, frame_len);
  auto meas = acquire_doppler_series(source, beacon, cfg.acquisition, meta.sample_rate_hz, stride);

  AssociationConfig ac = cfg.association;
  ac.carrier_hz = meta.center_freq_hz;
  ac.time_offset_s = meta.start_time_utc;
  meas = associate_measurements(std::move(meas), load_ephemerides(layout), cfg.assumed_rx_position(), ac);
  write_measurements_csv(layout.measurements(), meas);
  const auto assigned = std::count_if(meas.begin(), meas.end(), [](const auto& m) { return m.sv_id.has_value(); });
  std::cout << "measurements: " << meas.size() << " (" << assigned << " assigned)\n";
  return meas;
}

NavSolution run_solve(const PipelineConfig& cfg, const RunOptions& opts) {
  const Layout layout{opts.out_dir};
  require(layout.measurements(), "acquire");
  const auto meas = read_measurements_csv(layout.measurements());
  const auto eph = load_ephemerides(layout);
  double t0 = 0.0;
  double fc = cfg.carrier_hz;
  if (std::filesystem::exists(sidecar_path(layout.acquisition_capture()))) {
    const CaptureMeta meta = read_metadata(layout.acquisition_capture());
    t0 = meta.start_time_utc;
    fc = meta.center_freq_hz;
  }
  const auto obs = make_observations(meas, eph, fc, t0);
  PVTState s0;
  s0.p = enu_to_ecef(cfg.assumed_rx_position(), cfg.initial_offset_enu_m);
  const NavSolution initial = solve_ls(obs, s0, cfg.nav);
  const NavSolution refined = postfit_refine(obs, initial, cfg.nav);
  const Vec3 truth = cfg.rx_position();

  std::ofstream out(layout.solution());
  out << "[initial]\n" << solution_report(initial, cfg.nav, &truth);
  out << "[refined lambda=" << format_double(cfg.nav.lambda) << "]\n" << solution_report(refined, cfg.nav, &truth);
  out.close();
  if (!out) throw IoError("cannot write " + layout.solution().string());
  write_residuals_csv(layout.residuals(), obs, refined.report);
  write_lambda_sweep_csv(layout.lambda_sweep(), lambda_sweep(obs, initial, cfg.nav, cfg.lambda_sweep, truth));
  std::cout << "position error: " << format_double((refined.state.p - truth).norm()) << " m ("
            << (refined.report.converged ? "converged" : "not converged") << ", " << refined.report.iterations
            << " iterations)\n";
  if (!initial.report.converged || !refined.report.converged)
    throw SolveError("least squares did not converge within " + std::to_string(cfg.nav.max_iters) + " iterations");
  return refined;
}

void run_report(const PipelineConfig& cfg, const RunOptions& opts) {
  const Layout layout{opts.out_dir};
  std::filesystem::create_directories(layout.report_dir());
  const auto copy_or_header = [&](const std::filesystem::path& src, const std::vector<std::string>& header) {
    const auto dst = layout.report_dir() / src.filename();
    if (std::filesystem::exists(src)) {
      std::filesystem::copy_file(src, dst, std::filesystem::copy_options::overwrite_existing);
    } else {
      warn(src.filename().string() + " not found; writing an empty table");
      CsvWriter(dst, header).close();
    }
  };
  copy_or_header(layout.kf_trace(), {"k", "theta", "theta_dot", "theta_ddot", "residual_hz", "accepted"});
  copy_or_header(layout.phase_diff(), {"k", "delta_phi_rad", "accepted"});
  copy_or_header(layout.lambda_sweep(), {"lambda", "pos_error_m"});
  copy_or_header(layout.pilot_grid(), {"symbol", "subcarrier", "re", "im", "magnitude", "pilot"});

  {
    CsvWriter head(layout.report_dir() / "beacon_magnitude_head.csv", {"n", "magnitude"});
    CsvWriter tail(layout.report_dir() / "beacon_magnitude_tail.csv", {"n", "magnitude"});
    if (std::filesystem::exists(layout.beacon())) {
      const BeaconEstimate b = load_beacon(layout.beacon());
      const std::size_t span = std::min<std::size_t>(2000, b.b_hat.size());
      for (std::size_t i = 0; i < span; ++i) head.row(i, std::abs(b.b_hat[i]));
      for (std::size_t i = b.b_hat.size() - span; i < b.b_hat.size(); ++i) tail.row(i, std::abs(b.b_hat[i]));
    } else {
      warn("beacon.iq not found; beacon magnitude tables are empty");
    }
    head.close();
    tail.close();
  }

  require(layout.measurements(), "acquire");
  const auto meas = read_measurements_csv(layout.measurements());
  if (meas.empty()) warn("measurement list is empty");
  const auto eph = load_ephemerides(layout);
  double t0 = 0.0;
  double fc = cfg.carrier_hz;
  if (std::filesystem::exists(sidecar_path(layout.acquisition_capture()))) {
    const CaptureMeta meta = read_metadata(layout.acquisition_capture());
    t0 = meta.start_time_utc;
    fc = meta.center_freq_hz;
  }
  CsvWriter ds(layout.report_dir() / "doppler_series.csv", {"t", "f_d_hz", "sv_id", "predicted_hz"});
  const Vec3 rx = cfg.assumed_rx_position();
  for (const auto& m : meas) {
    std::string predicted;
    if (m.sv_id) {
      for (const auto& e : eph)
        if (e.sv_id() == *m.sv_id && e.covers(m.t + t0))
          predicted = format_double(predicted_doppler(e.interpolate(m.t + t0), rx, Vec3::Zero(), fc));
    }
    ds.row(m.t, m.f_d_hz, m.sv_id.value_or(""), predicted);
  }
  ds.close();
  log(opts, "report written to " + layout.report_dir().string());
}

}  // namespace leosop::pipeline
