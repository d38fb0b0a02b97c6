#pragma once

// Beacon-frame circular correlation over a grid of frequency hypotheses.
//
// For each f_i the frame is derotated by exp(-j 2 pi f_i n Ts) and
// C_i = IFFT(FFT(beacon) * conj(FFT(frame_i))), i.e.
// C_i[n] = sum_m beacon[(m + n) mod N] * conj(frame_i[m]).
// The global argmax (i, n) of |C| gives
//   delta_f   = f_i
//   delta_d   = (N - n) mod N        (frame ~ circshift(beacon, delta_d))
//   delta_phi = -arg C(i, n)         (frame ~ beacon * exp(j delta_phi))
// Ties resolve to the lowest frequency index, then the smallest lag.

#include <span>

#include "leosop/types.hpp"

namespace leosop {

struct FrequencyGrid {
  double f_min = 0.0;
  double f_max = 0.0;
  double f_step = 1.0;

  /// floor((f_max - f_min) / f_step) + 1, endpoints inclusive.
  std::size_t size() const;
  double at(std::size_t i) const { return f_min + f_step * static_cast<double>(i); }
  void validate() const;

  static FrequencyGrid single(double f) { return {f, f, 1.0}; }
  static FrequencyGrid centered(double center, double half_span, double step) {
    return {center - half_span, center + half_span, step};
  }
};

struct CorrelationResult {
  double delta_f_hz = 0.0;
  double delta_phi_rad = 0.0;
  std::size_t delta_d_samples = 0;
  /// max |C|, unnormalized (raw sample units squared).
  double peak = 0.0;
  /// peak / (||beacon|| ||frame||), in [0, 1].
  double normalized_peak = 0.0;
  std::size_t freq_index = 0;
  std::size_t lag_index = 0;
  /// Set when beacon or frame carries no energy.
  bool degenerate = false;
};

struct CorrelateOptions {
  /// Worker threads over frequency hypotheses (0 = hardware concurrency).
  unsigned threads = 1;
};

/// Caches the beacon spectrum for repeated correlation against one beacon.
class BeaconCorrelator {
 public:
  explicit BeaconCorrelator(std::span<const Complex> beacon);

  std::size_t length() const { return spectrum_.size(); }

  /// Throws ConfigError on length mismatch or an invalid grid.
  CorrelationResult correlate(std::span<const Complex> frame, const FrequencyGrid& grid,
                              double sample_period_s, CorrelateOptions options = {}) const;

 private:
  ComplexVector spectrum_;
  double norm_ = 0.0;
};

CorrelationResult correlate(std::span<const Complex> beacon, std::span<const Complex> frame,
                            const FrequencyGrid& grid, double sample_period_s,
                            CorrelateOptions options = {});

/// Direct O(|grid| N^2) evaluation of the same contract, without FFTs.
CorrelationResult correlate_oracle(std::span<const Complex> beacon, std::span<const Complex> frame,
                                   const FrequencyGrid& grid, double sample_period_s);

/// Wraps an angle to (-pi, pi].
double wrap_phase(double angle);

}  // namespace leosop
