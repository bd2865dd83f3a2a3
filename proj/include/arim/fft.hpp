#pragma once

#include <complex>
#include <span>
#include <vector>

namespace arim {

// In-place forward DFT, X[k] = sum_n x[n] exp(-2 pi i k n / N).
// Backed by FFTW; any length is accepted.
void fft_inplace(std::span<std::complex<double>> data);


} // namespace arim
