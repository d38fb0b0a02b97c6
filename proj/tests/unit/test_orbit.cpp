#include <doctest.h>

#include <random>

#include "leosop/constants.hpp"
#include "leosop/errors.hpp"
#include "leosop/orbit.hpp"
#include "test_support.hpp"

using namespace leosop;
namespace lt = leosop::testing;

namespace {

OrbitSpec leo() {
  OrbitSpec o;
  o.sv_id = "L1";
  o.semi_major_axis_m = 6'921'000.0;
  o.inclination_rad = 53.0 * kPi / 180.0;
  o.raan_rad = 0.7;
  o.arg_latitude_epoch_rad = 0.3;
  o.epoch = 100.0;
  return o;
}

}  // namespace

TEST_CASE("state at epoch sits at the epoch argument of latitude") {
  OrbitSpec o = leo();
  o.raan_rad = 0.0;
  o.inclination_rad = 0.0;
  const StateVector s = propagate_inertial(o, o.epoch);
  CHECK(s.position_ecef_m.x() == doctest::Approx(o.semi_major_axis_m * std::cos(0.3)).epsilon(1e-12));
  CHECK(s.position_ecef_m.y() == doctest::Approx(o.semi_major_axis_m * std::sin(0.3)).epsilon(1e-12));
  CHECK(std::abs(s.position_ecef_m.z()) < 1e-6);
}

TEST_CASE("inertial position repeats after one period") {
  const OrbitSpec o = leo();
  const double period = kTwoPi * std::sqrt(std::pow(o.semi_major_axis_m, 3) / kEarthMu);
  CHECK(o.period() == doctest::Approx(period).epsilon(1e-14));
  const Vec3 a = propagate_inertial(o, o.epoch + 17.0).position_ecef_m;
  const Vec3 b = propagate_inertial(o, o.epoch + 17.0 + period).position_ecef_m;
  CHECK((a - b).norm() / a.norm() < 1e-6);
}

TEST_CASE("circular speed matches sqrt(mu/a)") {
  const OrbitSpec o = leo();
  const double v = propagate_inertial(o, 250.0).velocity_ecef_mps.norm();
  const double expect = std::sqrt(kEarthMu / 6'921'000.0);
  CHECK(lt::relative_error(v, expect) < 1e-9);
  CHECK(expect == doctest::Approx(7589.0).epsilon(1e-3));
}

TEST_CASE("ecef velocity is the inertial one minus earth rotation") {
  const OrbitSpec o = leo();
  const double t = 321.0;
  const StateVector e = propagate(o, t);
  constexpr double h = 1e-3;
  const Vec3 fd = (propagate(o, t + h).position_ecef_m - propagate(o, t - h).position_ecef_m) / (2 * h);
  CHECK((fd - e.velocity_ecef_mps).norm() < 1e-3);
  CHECK((inertial_to_ecef(ecef_to_inertial(e.position_ecef_m, t), t) - e.position_ecef_m).norm() < 1e-6);
}

TEST_CASE("static geometry has no Doppler") {
  StateVector sv;
  sv.position_ecef_m = {7e6, 0, 0};
  CHECK(predicted_doppler(sv, Vec3{6.4e6, 1e5, 0}, Vec3::Zero(), 11.325e9) == 0.0);
}

TEST_CASE("Doppler crosses zero at the range minimum") {
  const Vec3 rx = lt::demo_receiver();
  const OrbitSpec o = lt::four_passes(rx)[0];
  double best_t = 0.0;
  double best_r = 1e300;
  double zero_t = 0.0;
  double prev = predicted_doppler(propagate(o, -200.0), rx, Vec3::Zero(), 11.325e9);
  constexpr double step = 0.5;
  for (double t = -200.0 + step; t <= 300.0; t += step) {
    const StateVector s = propagate(o, t);
    const double r = (s.position_ecef_m - rx).norm();
    if (r < best_r) {
      best_r = r;
      best_t = t;
    }
    const double f = predicted_doppler(s, rx, Vec3::Zero(), 11.325e9);
    if (prev > 0.0 && f <= 0.0) zero_t = t;
    prev = f;
  }
  CHECK(std::abs(zero_t - best_t) <= step);
}

TEST_CASE("Doppler magnitude stays under the orbital speed bound") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double fc = 11.325e9;
  const double bound = std::sqrt(kEarthMu / 6'921'000.0) / kSpeedOfLight * fc;
  CHECK(bound == doctest::Approx(287e3).epsilon(0.01));
  for (int i = 0; i < 200; ++i) {
    OrbitSpec o = leo();
    o.inclination_rad = std::acos(u(rng));
    o.raan_rad = kPi * u(rng);
    o.arg_latitude_epoch_rad = kPi * u(rng);
    const Vec3 rx = geodetic_to_ecef(std::asin(u(rng)), kPi * u(rng), 0.0);
    const double f = predicted_doppler(propagate_inertial(o, 50.0), rx, Vec3::Zero(), fc);
    CHECK(std::abs(f) <= bound * (1 + 1e-12));
  }
}

TEST_CASE("interpolation is exact at nodes and reproduces linear motion") {
  std::vector<StateVector> s;
  const Vec3 v{100.0, -20.0, 3.0};
  for (int i = 0; i < 5; ++i) {
    StateVector x;
    x.t = 10.0 * i;
    x.position_ecef_m = Vec3{1e6, 2e6, 3e6} + v * x.t;
    x.velocity_ecef_mps = v;
    s.push_back(x);
  }
  const EphemerisTable table("LIN", s);
  const StateVector node = table.interpolate(20.0);
  CHECK(node.position_ecef_m == s[2].position_ecef_m);
  CHECK(node.velocity_ecef_mps == s[2].velocity_ecef_mps);
  const StateVector mid = table.interpolate(25.0);
  CHECK((mid.position_ecef_m - (Vec3{1e6, 2e6, 3e6} + v * 25.0)).norm() < 1e-6);
  CHECK((mid.velocity_ecef_mps - v).norm() < 1e-9);
  CHECK_THROWS_AS(table.interpolate(41.0), ConfigError);
  CHECK_FALSE(table.covers(-0.1));
}

TEST_CASE("10 s ephemeris interpolates a LEO orbit to under a metre") {
  const OrbitSpec o = leo();
  const EphemerisTable table = EphemerisTable::sample(o, 0.0, 600.0, 10.0);
  double worst = 0.0;
  for (double t = 5.0; t < 600.0; t += 10.0)
    worst = std::max(worst, (table.interpolate(t).position_ecef_m - propagate(o, t).position_ecef_m).norm());
  CHECK(worst < 1.0);
}

TEST_CASE("ephemeris CSV round-trips and rejects bad tables") {
  const auto dir = lt::scratch_dir("orbit");
  const EphemerisTable table = EphemerisTable::sample(leo(), 0.0, 55.0, 10.0);
  CHECK(table.samples().back().t == 55.0);
  table.export_csv(dir / "L1.csv");
  const EphemerisTable back = EphemerisTable::import_csv(dir / "L1.csv", "L1");
  REQUIRE(back.samples().size() == table.samples().size());
  for (std::size_t i = 0; i < back.samples().size(); ++i) {
    CHECK(back.samples()[i].t == table.samples()[i].t);
    CHECK(back.samples()[i].position_ecef_m == table.samples()[i].position_ecef_m);
  }
  std::vector<StateVector> bad(2);
  CHECK_THROWS_AS(EphemerisTable("X", bad), ConfigError);
}

TEST_CASE("orbit_through puts the sub-satellite point over the target") {
  const Vec3 rx = lt::demo_receiver();
  for (const auto& o : lt::four_passes(rx)) {
    const double t_pass = o.sv_id == "SV1" ? 60.0 : o.sv_id == "SV2" ? 210.0 : o.sv_id == "SV3" ? 360.0 : 510.0;
    const Vec3 p = propagate(o, t_pass).position_ecef_m;
    CHECK(p.norm() == doctest::Approx(kEarthRadius + 550e3).epsilon(1e-12));
    CHECK(elevation(rx, p) > 30.0 * kPi / 180.0);
  }
  OrbitSpec bad = leo();
  bad.semi_major_axis_m = 1e6;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
