#pragma once

// Shared helpers and independent oracles for the test suites. Everything in
// here is deliberately naive (direct sums, single-bin DFTs) so it cannot
// share a failure mode with the library implementations it checks.

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "ngi/image.hpp"
#include "ngi/mask.hpp"
#include "ngi/rng.hpp"

namespace testsupport {

inline constexpr double kPi = 3.14159265358979323846;

inline ngi::Image2D noise_image(int width, int height, double pitch_um,
                                std::uint64_t seed, double lo = 0.0,
                                double hi = 1.0) {
  ngi::Image2D img(width, height, pitch_um);
  ngi::Rng rng(seed);
  for (double& v : img.values) v = lo + (hi - lo) * rng.next_double();
  return img;
}

// Single spectral bin by direct summation; the oracle for notch-filter
// energy bookkeeping (no FFT library involved).
inline std::complex<double> dft_bin(const ngi::Image2D& img, int ku, int kv) {
  std::complex<double> acc = 0.0;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      double phase = -2.0 * kPi *
                     (static_cast<double>(kv) * r / img.height +
                      static_cast<double>(ku) * c / img.width);
      acc += img.at(r, c) * std::complex<double>(std::cos(phase),
                                                 std::sin(phase));
    }
  return acc;
}

// Spectral energy summed over the nonzero block harmonics of both axes.
inline double harmonic_energy(const ngi::Image2D& img, int period) {
  double energy = 0.0;
  int hx = img.width / period;
  int hy = img.height / period;
  for (int m = 1; m < period; ++m)
    for (int n = 0; n < period; ++n) {
      energy += std::norm(dft_bin(img, m * hx, n * hy));
      if (m != 0 || n != 0) energy += std::norm(dft_bin(img, n * hx, m * hy));
    }
  return energy;
}

// Synthetic stationary speckle ensemble: i.i.d. uniform noise smoothed by a
// periodic Gaussian (circular convolution keeps the statistics exactly
// stationary). Cheap stand-in for mask projections in reconstruction tests.
ngi::SpeckleEnsemble stationary_ensemble(int size, std::size_t count,
                                         double smooth_sigma_px,
                                         std::uint64_t seed,
                                         double pitch_um = 51.4);

// Direct circular convolution, O(n^2); oracle for the XC <-> PSF identity.
ngi::Image2D circular_convolve_direct(const ngi::Image2D& image,
                                      const ngi::Image2D& kernel_centered);

// Brute-force evaluation of the XC estimator as a literal double loop.
ngi::Image2D xc_brute_force(const ngi::SpeckleEnsemble& ensemble,
                            const std::vector<double>& buckets);

// Dense minimum-norm least-squares solution of the mean-subtracted system,
// via Eigen's SVD (test-only dependency).
std::vector<double> least_squares_oracle(const ngi::SpeckleEnsemble& ensemble,
                                         const std::vector<double>& buckets);

inline double relative_l2(const std::vector<double>& a,
                          const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

}  // namespace testsupport
