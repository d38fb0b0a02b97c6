#pragma once

// OFDM grid layout shared by the simulator and the beacon demodulator.
// Grid columns are in natural order: column c holds subcarrier c - N/2.
// Modulation uses unitary DFT scaling, so per-symbol time-domain energy
// (without CP) equals the grid row energy.

#include <span>

#include "leosop/types.hpp"

namespace leosop {

struct OfdmParams {
  std::size_t n_subcarriers = 0;
  std::size_t cp_len = 0;
  std::size_t n_symbols = 0;
  /// Samples preceding the first OFDM symbol (the sync preamble).
  std::size_t preamble_len = 0;

  std::size_t symbol_len() const { return n_subcarriers + cp_len; }
  std::size_t total_len() const { return preamble_len + n_symbols * symbol_len(); }
  void validate() const;
};

/// Subcarrier index of a grid column.
int subcarrier_of_column(std::size_t column, std::size_t n_subcarriers);
/// DFT bin holding a grid column.
std::size_t bin_of_column(std::size_t column, std::size_t n_subcarriers);

/// Time-domain OFDM symbols (CP + body per row), n_symbols * symbol_len samples.
ComplexVector ofdm_modulate(const Grid<Complex>& grid, const OfdmParams& params);

/// Strips CP and transforms each symbol. `samples` must hold at least
/// params.total_len() samples; symbol s starts at preamble_len + s*symbol_len.
/// `cp_offset` shifts the FFT window inside the CP (0 = window starts right after the CP).
Grid<Complex> ofdm_demodulate(std::span<const Complex> samples, const OfdmParams& params,
                              std::ptrdiff_t cp_offset = 0);

}  // namespace leosop
