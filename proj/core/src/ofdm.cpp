#include "leosop/ofdm.hpp"

#include <cmath>

#include "leosop/errors.hpp"
#include "leosop/fft.hpp"

namespace leosop {

void OfdmParams::validate() const {
  if (n_subcarriers == 0 || n_symbols == 0)
    throw ConfigError("OFDM parameters: subcarrier and symbol counts must be positive");
  if (cp_len > n_subcarriers) throw ConfigError("OFDM parameters: CP longer than symbol");
}

int subcarrier_of_column(std::size_t column, std::size_t n_subcarriers) {
  return static_cast<int>(column) - static_cast<int>(n_subcarriers / 2);
}

std::size_t bin_of_column(std::size_t column, std::size_t n_subcarriers) {
  const auto n = static_cast<int>(n_subcarriers);
  return static_cast<std::size_t>(((subcarrier_of_column(column, n_subcarriers) % n) + n) % n);
}

ComplexVector ofdm_modulate(const Grid<Complex>& grid, const OfdmParams& params) {
  params.validate();
  if (!grid.same_shape(params.n_symbols, params.n_subcarriers))
    throw ConfigError("ofdm_modulate: grid shape does not match OFDM parameters");
  const std::size_t n = params.n_subcarriers;
  const double scale = std::sqrt(static_cast<double>(n));
  ComplexVector out(params.n_symbols * params.symbol_len());
  ComplexVector bins(n);
  ComplexVector body;
  for (std::size_t s = 0; s < params.n_symbols; ++s) {
    for (std::size_t c = 0; c < n; ++c) bins[bin_of_column(c, n)] = grid(s, c);
    ifft_into(bins, body);
    Complex* dst = out.data() + s * params.symbol_len();
    for (std::size_t i = 0; i < params.cp_len; ++i) dst[i] = body[n - params.cp_len + i] * scale;
    for (std::size_t i = 0; i < n; ++i) dst[params.cp_len + i] = body[i] * scale;
  }
  return out;
}

Grid<Complex> ofdm_demodulate(std::span<const Complex> samples, const OfdmParams& params,
                              std::ptrdiff_t cp_offset) {
  params.validate();
  if (samples.size() < params.total_len())
    throw ConfigError("ofdm_demodulate: " + std::to_string(samples.size()) +
                      " samples, layout needs " + std::to_string(params.total_len()));
  const std::size_t n = params.n_subcarriers;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const auto total = static_cast<std::ptrdiff_t>(samples.size());
  Grid<Complex> grid(params.n_symbols, n);
  ComplexVector body(n);
  ComplexVector bins;
  for (std::size_t s = 0; s < params.n_symbols; ++s) {
    const auto start = static_cast<std::ptrdiff_t>(params.preamble_len + s * params.symbol_len() +
                                                   params.cp_len) + cp_offset;
    for (std::size_t i = 0; i < n; ++i) {
      auto idx = (start + static_cast<std::ptrdiff_t>(i)) % total;
      if (idx < 0) idx += total;
      body[i] = samples[static_cast<std::size_t>(idx)];
    }
    fft_into(body, bins);
    for (std::size_t c = 0; c < n; ++c) grid(s, c) = bins[bin_of_column(c, n)] * scale;
  }
  return grid;
}

}  // namespace leosop
