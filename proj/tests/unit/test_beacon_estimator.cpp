#include <doctest.h>

#include <random>

#include "leosop/beacon_estimator.hpp"
#include "leosop/constants.hpp"
#include "leosop/errors.hpp"
#include "leosop/scenario.hpp"
#include "test_support.hpp"

using namespace leosop;
namespace lt = leosop::testing;

namespace {

SyntheticCapture fixed_capture(const BeaconSpec& spec, const FixedDynamics& fd, std::size_t k,
                               DataFill fill = DataFill::silent, std::optional<double> snr = std::nullopt) {
  ScenarioConfig sc;
  sc.K_frames = k;
  sc.data_fill = fill;
  sc.snr_db = snr;
  sc.fixed_dynamics = fd;
  return synthesize_capture(sc, spec, build_beacon(spec));
}

double max_relative_diff(const ComplexVector& a, const ComplexVector& b) {
  double worst = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return worst / scale;
}

}  // namespace

TEST_CASE("seed frame is the first one above the energy midpoint") {
  const std::vector<double> e{1.0, 1.1, 0.9, 5.0, 6.0};
  CHECK(select_seed_frame(e) == 3);
  CHECK_FALSE(select_seed_frame(std::vector<double>{0.0, 0.0}).has_value());
  CHECK(select_seed_frame(std::vector<double>{2.0, 2.0}) == 0);
}

TEST_CASE("noise-only capture never opens the gate") {
  const BeaconSpec spec = desk_beacon_spec(1);
  ScenarioConfig sc;
  sc.K_frames = 12;
  sc.snr_db = 0.0;
  sc.duty_cycle.mode = DutyCycle::Mode::silent;
  const SyntheticCapture cap = synthesize_capture(sc, spec, build_beacon(spec));
  EstimatorConfig cfg;
  const BeaconEstimate est = estimate_beacon(cap.frames, cfg);
  CHECK(est.accepted_count == 0);
  REQUIRE(est.seed_frame_index.has_value());
  CHECK(est.b_hat == cap.frames[*est.seed_frame_index].samples);
  CHECK_FALSE(est.resolved());
  CHECK(est.total_frames_seen == 12);
}

TEST_CASE("all-zero capture yields an empty estimate") {
  std::vector<FrameSignal> frames(3, FrameSignal{ComplexVector(64), 0});
  for (std::size_t i = 0; i < 3; ++i) frames[i].frame_index = i;
  const BeaconEstimate est = estimate_beacon(frames, EstimatorConfig{});
  CHECK(est.accepted_count == 0);
  CHECK_FALSE(est.seed_frame_index.has_value());
}

TEST_CASE("noise-free static capture reproduces the beacon after one accepted frame") {
  const BeaconSpec spec = desk_beacon_spec(1);
  const SyntheticCapture cap = fixed_capture(spec, FixedDynamics{}, 2);
  EstimationTrace trace;
  const BeaconEstimate est = estimate_beacon(cap.frames, EstimatorConfig{}, &trace);
  CHECK(est.accepted_count == 1);
  CHECK(max_relative_diff(est.b_hat, cap.truth.beacon) < 1e-9);
  REQUIRE(trace.rows.size() == 1);
  CHECK(trace.rows[0].accepted);
  CHECK(trace.rows[0].delta_d_samples == 0);
}

TEST_CASE("zero-Doppler ambiguities resolve to the planted shift") {
  const BeaconSpec spec = desk_beacon_spec(1);
  const SyntheticCapture cap = fixed_capture(spec, FixedDynamics{0.0, 0.0, 0.5, 137, "S"}, 4);
  EstimatorConfig cfg;
  const BeaconEstimate est = estimate_beacon(cap.frames, cfg);
  const FrequencyGrid coarse{-300e3, 300e3, 1000.0};
  const BeaconEstimate res = resolve_ambiguities(est, aids_from_spec(spec, cfg.sample_rate_hz), coarse);
  CHECK(res.resolved());
  CHECK(std::abs(res.ambiguities.f_DK_hz) <= cfg.grid.f_step / 2);
  CHECK(res.ambiguities.d_K_samples == 137);
  CHECK(std::abs(wrap_phase(res.ambiguities.theta_K_rad - 0.5)) < 1e-3);
  CHECK(max_relative_diff(res.b_hat, cap.truth.beacon) < 1e-3);
}

TEST_CASE("a planted 250 Hz residual is recovered") {
  const BeaconSpec spec = desk_beacon_spec(1);
  const double fs = 3.75e6;
  const SyntheticCapture cap = fixed_capture(spec, FixedDynamics{250.0, 0.0, -1.0, 2000, "S"}, 4);
  const BeaconEstimate est = estimate_beacon(cap.frames, EstimatorConfig{});
  const FrequencyGrid coarse{-300e3, 300e3, 1000.0};
  const BeaconEstimate res = resolve_ambiguities(est, aids_from_spec(spec, fs), coarse);
  CHECK(res.ambiguities.f_resolved);
  CHECK(std::abs(res.ambiguities.f_DK_hz - 250.0) <= coarse.f_step / 2);
  CHECK(res.ambiguities.d_K_samples == 2000);
  CHECK(normalized_correlation(res.b_hat, cap.truth.beacon) > 0.999);
}

TEST_CASE("apply_ambiguities undoes a planted shift, tone and phase") {
  std::mt19937_64 rng(1);
  const ComplexVector b = lt::random_signal(300, rng);
  const double ts = 1e-4;
  ComplexVector r(300);
  for (std::size_t i = 0; i < 300; ++i)
    r[i] = b[(i + 300 - 17) % 300] * std::polar(1.0, 0.9 + kTwoPi * 40.0 * static_cast<double>(i) * ts);
  // the tone is referenced to the start of the shifted copy
  const ComplexVector back = apply_ambiguities(r, 40.0, 17, 0.9, ts);
  const Complex ref = back[0] / b[0];
  CHECK(std::abs(std::abs(ref) - 1.0) < 1e-12);
  for (std::size_t i = 0; i < 300; ++i) CHECK(std::abs(back[i] - ref * b[i]) < 1e-9);
  CHECK(circshift(b, 3)[3] == b[0]);
  CHECK(circshift(b, -1)[0] == b[1]);
}

TEST_CASE("demodulation inverts the beacon construction") {
  const BeaconSpec spec = desk_beacon_spec(1);
  const ComplexVector b = build_beacon(spec);
  const Grid<Complex> g = demodulate_grid(b, spec.ofdm());
  double worst = 0.0;
  double pilot_mag = 0.0;
  std::size_t pilots = 0;
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) {
      worst = std::max(worst, std::abs(g(r, c) - spec.pilot_symbols(r, c)));
      if (spec.pilot_mask(r, c)) {
        pilot_mag += std::abs(g(r, c));
        ++pilots;
      }
    }
  CHECK(worst < 1e-6);
  pilot_mag /= static_cast<double>(pilots);
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c)
      if (spec.is_gutter_column(c)) CHECK(std::abs(g(r, c)) < 1e-6 * pilot_mag);
  CHECK(constellation_error(g) < constellation_error(demodulate_grid(b, spec.ofdm(), -1)));
  CHECK(constellation_error(g) < constellation_error(demodulate_grid(b, spec.ofdm(), 1)));
  CHECK_THROWS_AS(demodulate_grid(ComplexVector(100), spec.ofdm()), ConfigError);
}

TEST_CASE("noise-free classification recovers the planted mask exactly") {
  for (const BeaconSpec& spec : {desk_beacon_spec(3), starlink_like_beacon_spec(3)}) {
    const ComplexVector b = scale_to_rms(build_beacon(spec), 2500.0);
    const Grid<Complex> g = demodulate_grid(b, spec.ofdm());
    const PilotGrid pg = classify_pilots(g, kDefaultPilotThreshold, strong_cell_rms(g), spec);
    CHECK(pg.mask.data() == spec.pilot_mask.data());
    CHECK(pg.pilot_fraction == doctest::Approx(pilot_fraction(spec)).epsilon(1e-12));
  }
}

TEST_CASE("classification uses the magnitude threshold after normalization") {
  Grid<Complex> g(1, 4);
  g(0, 0) = 6000.0;
  g(0, 1) = Complex(0.0, 4000.0);
  g(0, 2) = 5001.0;
  const PilotGrid pg = classify_pilots(g);
  CHECK(pg.mask(0, 0));
  CHECK_FALSE(pg.mask(0, 1));
  CHECK(pg.mask(0, 2));
  CHECK_FALSE(pg.mask(0, 3));
  CHECK(pg.pilot_fraction == doctest::Approx(0.5));
}

TEST_CASE("beacon file round-trips ambiguities and counts") {
  const auto dir = lt::scratch_dir("beacon");
  std::mt19937_64 rng(2);
  BeaconEstimate est;
  est.b_hat = lt::random_signal(500, rng, 1000.0);
  est.accepted_count = 42;
  est.total_frames_seen = 50;
  est.ambiguities = {29530.0, 2.52, 70966, true, true, true, 0.1};
  est.ambiguities_applied = true;
  est.seed_frame_index = 3;
  save_beacon(dir / "b.iq", est, 3.75e6, 11.325e9, "abc");
  CaptureMeta meta;
  const BeaconEstimate back = load_beacon(dir / "b.iq", &meta);
  CHECK(back.accepted_count == 42);
  CHECK(back.total_frames_seen == 50);
  CHECK(back.ambiguities.f_DK_hz == 29530.0);
  CHECK(back.ambiguities.theta_K_rad == 2.52);
  CHECK(back.ambiguities.d_K_samples == 70966);
  CHECK(back.resolved());
  CHECK(back.seed_frame_index == 3);
  CHECK(meta.extra.at("estimator_config_hash") == "abc");
  CHECK(normalized_correlation(back.b_hat, est.b_hat) > 0.99999);
}

TEST_CASE("elevation prefilter keeps epochs with a visible SV") {
  const Vec3 rx = lt::demo_receiver();
  const auto eph = lt::sample_ephemerides(lt::four_passes(rx), -10.0, 700.0);
  const std::vector<double> t{60.0, 210.0, 690.0};
  const auto keep = elevation_prefilter(t, eph, rx, 45.0 * kPi / 180.0);
  CHECK(keep == std::vector<std::size_t>{0, 1});
}

TEST_CASE("estimator rejects mismatched provided seeds") {
  const BeaconSpec spec = desk_beacon_spec(1);
  const SyntheticCapture cap = fixed_capture(spec, FixedDynamics{}, 2);
  EstimatorConfig cfg;
  cfg.init_policy = InitPolicy::provided_seed;
  cfg.seed = ComplexVector(10);
  CHECK_THROWS_AS(estimate_beacon(cap.frames, cfg), ConfigError);
  cfg.seed = cap.truth.beacon;
  const BeaconEstimate est = estimate_beacon(cap.frames, cfg);
  CHECK(est.accepted_count == 2);
}
