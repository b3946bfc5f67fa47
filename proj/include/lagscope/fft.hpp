#pragma once

#include <complex>
#include <span>
#include <vector>

namespace lagscope::fft {

using cplx = std::complex<double>;

// Forward DFT, F(f) = sum_t x(t) exp(-i 2 pi f t / T), unscaled.
std::vector<cplx> forward(std::span<const cplx> input);
std::vector<cplx> forward_real(std::span<const double> input);

// Inverse DFT with the 1/T factor, x(t) = (1/T) sum_f F(f) exp(+i 2 pi f t / T).
std::vector<cplx> inverse(std::span<const cplx> input);

}  // namespace lagscope::fft
