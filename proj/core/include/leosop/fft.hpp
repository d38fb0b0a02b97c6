#pragma once

#include <span>

#include "leosop/types.hpp"

namespace leosop {

/// Forward DFT, X[k] = sum_n x[n] exp(-j 2 pi k n / N). Unnormalized.
ComplexVector fft(std::span<const Complex> x);

/// Inverse DFT with 1/N scaling, so ifft(fft(x)) == x.
ComplexVector ifft(std::span<const Complex> x);

/// In-place variants writing into `out` (resized as needed).
void fft_into(std::span<const Complex> x, ComplexVector& out);
void ifft_into(std::span<const Complex> x, ComplexVector& out);
/// Inverse transform without the 1/N factor.
void unscaled_ifft_into(std::span<const Complex> x, ComplexVector& out);

}  // namespace leosop
