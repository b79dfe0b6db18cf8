#pragma once

#include <complex>

namespace ngi::fft {

/// In-place 2D DFT of a row-major height x width buffer. FFTW sign
/// convention: sign = -1 forward, +1 inverse; transforms are unnormalized.
/// Plans are cached per (height, width, sign); execution is thread safe.
void transform2d(std::complex<double>* data, int height, int width, int sign);

}  // namespace ngi::fft
