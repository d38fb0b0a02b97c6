#include <doctest.h>

#include <random>

#include "leosop/constants.hpp"
#include "leosop/errors.hpp"
#include "leosop/fft.hpp"
#include "leosop/phase_tracker.hpp"
#include "test_support.hpp"

using namespace leosop;
namespace lt = leosop::testing;

namespace {

ComplexVector tone(std::size_t n, double theta, double theta_dot, double theta_ddot, double ts) {
  ComplexVector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * ts;
    x[i] = std::polar(1.0, theta + theta_dot * t + 0.5 * theta_ddot * t * t);
  }
  return x;
}

}  // namespace

TEST_CASE("null state stays null without process noise") {
  KFConfig cfg;
  cfg.q_w = 0.0;
  TrackState s;
  const TrackState p = predict(s, cfg);
  CHECK(p.x.isZero(0.0));
  CHECK(p.P.isZero(0.0));
  CHECK(p.k == 1);
}

TEST_CASE("one prediction step applies the exact polynomial transition") {
  KFConfig cfg;
  const double T = 1.0 / 750.0;
  cfg.frame_period_s = T;
  TrackState s;
  const double a = 123.0;
  s.x = {0.0, 0.0, a};
  const TrackState p = predict(s, cfg);
  CHECK(p.x(0) == doctest::Approx(a * T * T / 2).epsilon(1e-14));
  CHECK(p.x(1) == doctest::Approx(a * T).epsilon(1e-14));
  CHECK(p.x(2) == a);
}

TEST_CASE("n steps of T equal one step of nT for the mean") {
  KFConfig cfg;
  cfg.frame_period_s = 1.0 / 750.0;
  TrackState s;
  s.x = {0.3, 2.0 * kPi * 1500.0, -2.0 * kPi * 40.0};
  TrackState many = s;
  for (int i = 0; i < 9; ++i) many = predict(many, cfg);
  KFConfig big = cfg;
  big.frame_period_s = 9.0 / 750.0;
  const TrackState one = predict(s, big);
  for (int i = 0; i < 3; ++i) CHECK(lt::relative_error(many.x(i), one.x(i)) < 1e-12);
  CHECK((transition_matrix(9 * cfg.frame_period_s) - lt::TextbookKF::F(9 * cfg.frame_period_s)).norm() < 1e-15);
  CHECK((process_noise(cfg.frame_period_s, 2.0) - lt::TextbookKF::Q(cfg.frame_period_s, 2.0)).norm() < 1e-24);
}

TEST_CASE("wipe-off is the identity for a zero state and inverts its own trajectory") {
  std::mt19937_64 rng(1);
  const ComplexVector x = lt::random_signal(257, rng);
  TrackState zero;
  CHECK(wipe_off(x, zero, 1e-6) == x);

  TrackState s;
  s.x = {0.7, 2.0 * kPi * 12345.0, 2.0 * kPi * -3000.0};
  const double ts = 1.0 / 3.75e6;
  const ComplexVector w = wipe_off(tone(5000, s.x(0), s.x(1), s.x(2), ts), s, ts);
  double worst = 0.0;
  for (const auto& v : w) worst = std::max(worst, std::abs(v - Complex(1.0, 0.0)));
  CHECK(worst < 1e-9);
}

TEST_CASE("a frequency offset left after wipe-off shows up as a tone") {
  const double ts = 1.0 / 3.75e6;
  const std::size_t n = 5000;
  const double delta = 3000.0;
  TrackState s;
  s.x = {0.2, 2.0 * kPi * 20000.0, 2.0 * kPi * 500.0};
  const ComplexVector w = wipe_off(tone(n, s.x(0), s.x(1) + 2.0 * kPi * delta, s.x(2), ts), s, ts);
  const ComplexVector X = fft(w);
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(X[i]) > std::abs(X[best])) best = i;
  const double bin = 1.0 / (static_cast<double>(n) * ts);
  CHECK(std::abs(static_cast<double>(best) * bin - delta) <= bin);
}

TEST_CASE("zero innovation keeps the mean and shrinks the rate variance") {
  KFConfig cfg;
  TrackState s = cfg.initial_state();
  s.x = {1.0, 2.0, 3.0};
  const TrackState u = update(s, 0.0, cfg);
  CHECK(u.x == s.x);
  CHECK(u.P(1, 1) < s.P(1, 1));
}

TEST_CASE("scalar gain case") {
  KFConfig cfg;
  cfg.q_w = 0.0;
  cfg.R = 70.0;
  TrackState s;
  const double p = 500.0;
  s.P = Eigen::Vector3d(0.0, p, 0.0).asDiagonal();
  s.x = {0.0, 10.0, 0.0};
  const double df = 2.5;
  const TrackState u = update(s, df, cfg);
  CHECK(u.x(1) == doctest::Approx(10.0 + p / (p + cfg.R) * 2.0 * kPi * df).epsilon(1e-14));
  CHECK(u.P(1, 1) == doctest::Approx(p * cfg.R / (p + cfg.R)).epsilon(1e-12));
}

TEST_CASE("full update matches the textbook filter") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 1.0);
  KFConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    TrackState s;
    s.x = {g(rng), 100.0 * g(rng), 1000.0 * g(rng)};
    Eigen::Matrix3d A;
    for (int i = 0; i < 9; ++i) A(i / 3, i % 3) = g(rng);
    s.P = A * A.transpose() * std::exp(3.0 * g(rng)) + Eigen::Matrix3d::Identity();
    const double df = 5.0 * g(rng);
    Eigen::Vector3d x = s.x;
    Eigen::Matrix3d P = s.P;
    lt::TextbookKF::update(x, P, df, cfg.R);
    const TrackState u = update(s, df, cfg);
    CHECK((u.x - x).norm() / x.norm() < 1e-9);
    CHECK((u.P - P).norm() / P.norm() < 1e-9);
  }
}

TEST_CASE("covariance stays PSD over many cycles") {
  KFConfig cfg;
  TrackState s = cfg.initial_state();
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 3.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    s = update(predict(s, cfg), g(rng), cfg);
    worst = std::min(worst, min_eigenvalue(s.P) / std::max(1.0, s.P.norm()));
  }
  CHECK(worst > -1e-12);
}

TEST_CASE("non-finite measurement and bad config are rejected") {
  KFConfig cfg;
  CHECK_THROWS_AS(update(cfg.initial_state(), std::nan(""), cfg), ConfigError);
  cfg.R = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
