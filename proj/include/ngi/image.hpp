#pragma once

#include <cstddef>
#include <vector>

namespace ngi {

/// Dense row-major image with a physical pixel pitch in micrometres.
/// Values are 64-bit reals internally regardless of file dtype.
struct Image2D {
  int width = 0;
  int height = 0;
  double pitch_um = 0.0;
  std::vector<double> values;  // height * width, row-major

  Image2D() = default;
  Image2D(int width_px, int height_px, double pitch, double fill = 0.0);

  double& at(int row, int col) {
    return values[static_cast<std::size_t>(row) * width + col];
  }
  double at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * width + col];
  }
  std::size_t pixel_count() const { return values.size(); }
  bool same_shape(const Image2D& other) const {
    return width == other.width && height == other.height;
  }
};

/// Rectangular sub-region; must lie entirely inside the target image.
struct RegionSpec {
  int origin_row = 0;
  int origin_col = 0;
  int rows = 0;
  int cols = 0;
};

double total_sum(const Image2D& img);

/// Throws std::runtime_error if the image contains NaN or Inf.
void require_finite(const Image2D& img, const char* where);

/// Sum-binning by an integer factor: each output value is the sum of a
/// factor x factor block, so count integrals are preserved. Output pitch is
/// scaled by the factor.
Image2D bin(const Image2D& img, int factor);

Image2D crop(const Image2D& img, const RegionSpec& region);

/// Convolution with a normalized sampled Gaussian of the given standard
/// deviation (micrometres), separable, with half-sample symmetric boundary
/// reflection. Preserves the total sum exactly; sigma_um = 0 is the identity.
Image2D gaussian_blur(const Image2D& img, double sigma_um);

/// Zeroes every spectral row/column within notch_halfwidth bins of a nonzero
/// harmonic of frequency 1/period_px along either axis (cross-shaped notch
/// set). The DC bin is always preserved and the output is real.
Image2D fft_notch_filter(const Image2D& img, int period_px,
                         int notch_halfwidth = 1);

/// Sum of squared value differences across rows/columns at multiples of
/// `period`; the assertable blocking-artifact measure.
double block_boundary_energy(const Image2D& img, int period);

/// Linear-interpolated quantile of a sample, q in [0, 1]. Takes the data by
/// value because it partially sorts in place.
double quantile(std::vector<double> values, double q);

}  // namespace ngi
