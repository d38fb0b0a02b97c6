#include "leosop/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "leosop/constants.hpp"
#include "leosop/errors.hpp"
#include "leosop/fft.hpp"

namespace leosop {
namespace {

struct Best {
  double magnitude = -1.0;
  Complex value;
  std::size_t freq_index = 0;
  std::size_t lag = 0;
};

double energy_norm(std::span<const Complex> x) {
  double e = 0.0;
  for (const auto& v : x) e += std::norm(v);
  return std::sqrt(e);
}

// Phasor recurrence, re-anchored every 256 samples to bound rounding drift.
void derotate(std::span<const Complex> frame, double f, double ts, ComplexVector& out) {
  out.resize(frame.size());
  const double w = -kTwoPi * f * ts;
  const Complex step = std::polar(1.0, w);
  Complex ph;
  for (std::size_t n = 0; n < frame.size(); ++n) {
    if ((n & 255u) == 0) ph = std::polar(1.0, w * static_cast<double>(n));
    out[n] = frame[n] * ph;
    ph *= step;
  }
}

CorrelationResult finish(const Best& best, const FrequencyGrid& grid, std::size_t n,
                         double beacon_norm, double frame_norm) {
  CorrelationResult r;
  r.freq_index = best.freq_index;
  r.lag_index = best.lag;
  r.delta_f_hz = grid.at(best.freq_index);
  r.delta_d_samples = (n - best.lag) % n;
  r.peak = best.magnitude;
  r.delta_phi_rad = wrap_phase(-std::arg(best.value));
  r.degenerate = !(beacon_norm > 0.0) || !(frame_norm > 0.0);
  r.normalized_peak = r.degenerate ? 0.0 : r.peak / (beacon_norm * frame_norm);
  if (r.degenerate) r.delta_phi_rad = 0.0;
  return r;
}

void check_inputs(std::size_t beacon_len, std::size_t frame_len, const FrequencyGrid& grid,
                  double ts) {
  if (beacon_len != frame_len)
    throw ConfigError("correlate: beacon length " + std::to_string(beacon_len) +
                      " differs from frame length " + std::to_string(frame_len));
  if (beacon_len == 0) throw ConfigError("correlate: empty frame");
  if (!(ts > 0.0)) throw ConfigError("correlate: sample period must be > 0");
  grid.validate();
}

}  // namespace

double wrap_phase(double angle) {
  double a = std::remainder(angle, kTwoPi);
  if (a <= -kPi) a += kTwoPi;
  return a;
}

std::size_t FrequencyGrid::size() const {
  if (!(f_step > 0.0) || !(f_max >= f_min)) return 0;
  return static_cast<std::size_t>(std::floor((f_max - f_min) / f_step + 1e-9)) + 1;
}

void FrequencyGrid::validate() const {
  if (!std::isfinite(f_min) || !std::isfinite(f_max) || !std::isfinite(f_step))
    throw ConfigError("frequency grid: non-finite bounds");
  if (!(f_step > 0.0)) throw ConfigError("frequency grid: f_step must be > 0");
  if (!(f_min <= f_max)) throw ConfigError("frequency grid: empty (f_min > f_max)");
}

BeaconCorrelator::BeaconCorrelator(std::span<const Complex> beacon)
    : spectrum_(fft(beacon)), norm_(energy_norm(beacon)) {}

CorrelationResult BeaconCorrelator::correlate(std::span<const Complex> frame,
                                              const FrequencyGrid& grid, double ts,
                                              CorrelateOptions options) const {
  const std::size_t n = spectrum_.size();
  check_inputs(n, frame.size(), grid, ts);
  const std::size_t count = grid.size();

  // f = m * bin + phi: derotating by m whole bins is a circular shift of the
  // spectrum, so one forward FFT serves every hypothesis sharing phi.
  const double bin = 1.0 / (static_cast<double>(n) * ts);
  struct Hyp {
    std::size_t index;
    std::int64_t shift;
    double phi;
    std::int64_t key;
  };
  std::vector<Hyp> hyps(count);
  const auto nn = static_cast<std::int64_t>(n);
  for (std::size_t i = 0; i < count; ++i) {
    const double f = grid.at(i);
    auto m = static_cast<std::int64_t>(std::floor(f / bin));
    double phi = f - static_cast<double>(m) * bin;
    if (phi >= bin * (1.0 - 1e-12)) {
      ++m;
      phi = 0.0;
    }
    hyps[i] = {i, ((m % nn) + nn) % nn, phi, std::llround(phi * 1e9)};
  }

  unsigned threads = options.threads == 0 ? std::thread::hardware_concurrency() : options.threads;
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));

  std::vector<Best> partial(threads);
  const auto work = [&](unsigned w) {
    const std::size_t begin = count * w / threads;
    const std::size_t end = count * (w + 1) / threads;
    std::vector<Hyp> mine(hyps.begin() + static_cast<std::ptrdiff_t>(begin),
                          hyps.begin() + static_cast<std::ptrdiff_t>(end));
    std::stable_sort(mine.begin(), mine.end(), [](const Hyp& a, const Hyp& b) { return a.key < b.key; });
    ComplexVector rotated;
    ComplexVector spectrum;
    ComplexVector product(n);
    ComplexVector corr;
    Best best;
    std::int64_t current = -1;
    for (const Hyp& h : mine) {
      if (h.key != current) {
        derotate(frame, h.phi, ts, rotated);
        fft_into(rotated, spectrum);
        current = h.key;
      }
      const auto shift = static_cast<std::size_t>(h.shift);
      for (std::size_t k = 0; k < n; ++k) {
        std::size_t src = k + shift;
        if (src >= n) src -= n;
        product[k] = spectrum_[k] * std::conj(spectrum[src]);
      }
      unscaled_ifft_into(product, corr);
      for (std::size_t lag = 0; lag < n; ++lag) {
        const double m = std::norm(corr[lag]);
        if (m > best.magnitude ||
            (m == best.magnitude && (h.index < best.freq_index ||
                                     (h.index == best.freq_index && lag < best.lag))))
          best = {m, corr[lag], h.index, lag};
      }
    }
    partial[w] = best;
  };

  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  Best best;
  for (const auto& p : partial)
    if (p.magnitude > best.magnitude) best = p;
  best.value /= static_cast<double>(n);
  best.magnitude = std::abs(best.value);
  return finish(best, grid, n, norm_, energy_norm(frame));
}

CorrelationResult correlate(std::span<const Complex> beacon, std::span<const Complex> frame,
                            const FrequencyGrid& grid, double ts, CorrelateOptions options) {
  check_inputs(beacon.size(), frame.size(), grid, ts);
  return BeaconCorrelator(beacon).correlate(frame, grid, ts, options);
}

CorrelationResult correlate_oracle(std::span<const Complex> beacon, std::span<const Complex> frame,
                                   const FrequencyGrid& grid, double ts) {
  check_inputs(beacon.size(), frame.size(), grid, ts);
  const std::size_t n = beacon.size();
  ComplexVector rotated(n);
  Best best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t m = 0; m < n; ++m)
      rotated[m] = frame[m] * std::polar(1.0, -kTwoPi * grid.at(i) * static_cast<double>(m) * ts);
    for (std::size_t lag = 0; lag < n; ++lag) {
      Complex acc{};
      for (std::size_t m = 0; m < n; ++m) acc += beacon[(m + lag) % n] * std::conj(rotated[m]);
      const double mag = std::abs(acc);
      if (mag > best.magnitude) best = {mag, acc, i, lag};
    }
  }
  return finish(best, grid, n, energy_norm(beacon), energy_norm(frame));
}

}  // namespace leosop
