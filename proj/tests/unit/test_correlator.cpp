#include <doctest.h>

#include <random>

#include "leosop/constants.hpp"
#include "leosop/correlator.hpp"
#include "leosop/errors.hpp"
#include "test_support.hpp"

using namespace leosop;
namespace lt = leosop::testing;

namespace {

ComplexVector plant(const ComplexVector& b, std::size_t shift, double phi, double f, double ts) {
  const std::size_t n = b.size();
  ComplexVector r(n);
  for (std::size_t i = 0; i < n; ++i)
    r[i] = b[(i + n - shift) % n] * std::polar(1.0, phi + kTwoPi * f * static_cast<double>(i) * ts);
  return r;
}

}  // namespace

TEST_CASE("autocorrelation peak") {
  std::mt19937_64 rng(1);
  const ComplexVector b = lt::random_signal(512, rng);
  const CorrelationResult r = correlate(b, b, FrequencyGrid::single(0.0), 1e-6);
  double e = 0.0;
  for (const auto& v : b) e += std::norm(v);
  CHECK(r.delta_f_hz == 0.0);
  CHECK(r.delta_d_samples == 0);
  CHECK(std::abs(r.delta_phi_rad) < 1e-12);
  CHECK(lt::relative_error(r.peak, e) < 1e-9);
  CHECK(r.normalized_peak == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("planted shift, phase and frequency are inverted") {
  std::mt19937_64 rng(2);
  const double ts = 1.0 / 3.75e6;
  const ComplexVector b = lt::random_signal(1000, rng);
  const ComplexVector r = plant(b, 7, 0.3, 3.0, ts);
  const FrequencyGrid grid{-10.0, 10.0, 0.5};
  for (const auto& res : {correlate(b, r, grid, ts), correlate_oracle(b, r, grid, ts)}) {
    CHECK(res.delta_f_hz == doctest::Approx(3.0));
    CHECK(res.delta_d_samples == 7);
    CHECK(res.delta_phi_rad == doctest::Approx(0.3).epsilon(1e-9));
  }
}

TEST_CASE("fast path agrees with the oracle on random instances") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> len(16, 600);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = len(rng);
    const double ts = 1.0 / (1e5 * (0.5 + u(rng)));
    const ComplexVector b = lt::random_signal(n, rng);
    ComplexVector r = plant(b, n * u(rng), kTwoPi * u(rng), 200.0 * (u(rng) - 0.5), ts);
    const ComplexVector noise = lt::random_signal(n, rng, 0.5);
    for (std::size_t i = 0; i < n; ++i) r[i] += noise[i];
    const FrequencyGrid grid{-150.0 + 10.0 * u(rng), 150.0, 5.0 + 20.0 * u(rng)};
    const auto fast = correlate(b, r, grid, ts);
    const auto slow = correlate_oracle(b, r, grid, ts);
    CHECK(fast.freq_index == slow.freq_index);
    CHECK(fast.delta_d_samples == slow.delta_d_samples);
    CHECK(lt::relative_error(fast.peak, slow.peak) < 1e-9);
    CHECK(std::abs(wrap_phase(fast.delta_phi_rad - slow.delta_phi_rad)) < 1e-9);
  }
}

TEST_CASE("threaded search returns the single-threaded answer") {
  std::mt19937_64 rng(4);
  const ComplexVector b = lt::random_signal(777, rng);
  const ComplexVector r = plant(b, 100, 1.0, 1234.0, 1e-5);
  const FrequencyGrid grid{-3000.0, 3000.0, 37.0};
  const auto one = correlate(b, r, grid, 1e-5);
  const auto many = correlate(b, r, grid, 1e-5, CorrelateOptions{4});
  CHECK(one.freq_index == many.freq_index);
  CHECK(one.lag_index == many.lag_index);
  CHECK(one.peak == many.peak);
}

TEST_CASE("impulse pair follows the lag convention") {
  ComplexVector b(16), r(16);
  b[0] = 1.0;
  r[5] = 1.0;
  const auto fast = correlate(b, r, FrequencyGrid::single(0.0), 1.0);
  const auto slow = correlate_oracle(b, r, FrequencyGrid::single(0.0), 1.0);
  CHECK(fast.delta_d_samples == 5);
  CHECK(slow.delta_d_samples == 5);
  CHECK(fast.lag_index == slow.lag_index);
}

TEST_CASE("zero frame is degenerate") {
  std::mt19937_64 rng(5);
  const ComplexVector b = lt::random_signal(64, rng);
  const ComplexVector z(64);
  for (const auto& res : {correlate(b, z, FrequencyGrid::single(0.0), 1.0),
                          correlate_oracle(b, z, FrequencyGrid::single(0.0), 1.0)}) {
    CHECK(res.peak == 0.0);
    CHECK(res.degenerate);
    CHECK(res.normalized_peak == 0.0);
  }
}

TEST_CASE("ties resolve to the lowest frequency then the smallest lag") {
  ComplexVector b(8, Complex(1.0, 0.0));
  const auto r = correlate(b, b, FrequencyGrid::single(0.0), 1.0);
  CHECK(r.lag_index == 0);
  // a zero-frequency-insensitive frame: every hypothesis ties
  ComplexVector imp(8);
  imp[0] = 1.0;
  const auto t = correlate(imp, imp, FrequencyGrid{-2.0, 2.0, 1.0}, 0.1);
  CHECK(t.freq_index == 0);
  CHECK(t.delta_f_hz == -2.0);
}

TEST_CASE("grid size, validation and wrap") {
  CHECK(FrequencyGrid{-10.0, 10.0, 0.5}.size() == 41);
  CHECK(FrequencyGrid{-300e3, 300e3, 10.0}.size() == 60001);
  CHECK(FrequencyGrid{0.0, 0.9, 0.5}.size() == 2);
  CHECK_THROWS_AS((FrequencyGrid{1.0, 0.0, 1.0}.validate()), ConfigError);
  CHECK_THROWS_AS((FrequencyGrid{0.0, 1.0, 0.0}.validate()), ConfigError);
  CHECK(wrap_phase(kPi) == doctest::Approx(kPi));
  CHECK(wrap_phase(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_phase(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  std::mt19937_64 rng(6);
  CHECK_THROWS_AS(correlate(lt::random_signal(8, rng), lt::random_signal(9, rng), FrequencyGrid::single(0.0), 1.0),
                  ConfigError);
}
