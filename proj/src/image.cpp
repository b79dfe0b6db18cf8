#include "ngi/image.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "ngi/fft.hpp"
#include "ngi/parallel.hpp"

namespace ngi {

Image2D::Image2D(int width_px, int height_px, double pitch, double fill)
    : width(width_px), height(height_px), pitch_um(pitch) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("Image2D: dimensions must be >= 1");
  if (!(pitch_um > 0.0))
    throw std::invalid_argument("Image2D: pitch must be > 0");
  values.assign(static_cast<std::size_t>(width) * height, fill);
}

double total_sum(const Image2D& img) {
  double sum = 0.0;
  for (double v : img.values) sum += v;
  return sum;
}

void require_finite(const Image2D& img, const char* where) {
  for (double v : img.values) {
    if (!std::isfinite(v))
      throw std::runtime_error(std::string(where) +
                               ": image contains non-finite values");
  }
}

Image2D bin(const Image2D& img, int factor) {
  if (factor < 1) throw std::invalid_argument("bin: factor must be >= 1");
  if (img.width % factor != 0)
    throw std::invalid_argument("bin: factor does not divide width (" +
                                std::to_string(img.width) + " px)");
  if (img.height % factor != 0)
    throw std::invalid_argument("bin: factor does not divide height (" +
                                std::to_string(img.height) + " px)");
  Image2D out(img.width / factor, img.height / factor, img.pitch_um * factor);
  for (int r = 0; r < img.height; ++r) {
    const double* src = &img.values[static_cast<std::size_t>(r) * img.width];
    double* dst = &out.values[static_cast<std::size_t>(r / factor) * out.width];
    for (int c = 0; c < img.width; ++c) dst[c / factor] += src[c];
  }
  return out;
}

Image2D crop(const Image2D& img, const RegionSpec& region) {
  if (region.rows < 1 || region.cols < 1)
    throw std::invalid_argument("crop: region must be at least 1x1");
  if (region.origin_row < 0 || region.origin_col < 0 ||
      region.origin_row + region.rows > img.height ||
      region.origin_col + region.cols > img.width)
    throw std::invalid_argument("crop: region out of bounds");
  Image2D out(region.cols, region.rows, img.pitch_um);
  for (int r = 0; r < region.rows; ++r) {
    const double* src = &img.values[static_cast<std::size_t>(
                                        region.origin_row + r) *
                                        img.width +
                                    region.origin_col];
    std::copy(src, src + region.cols,
              &out.values[static_cast<std::size_t>(r) * out.width]);
  }
  return out;
}

namespace {

// Half-sample symmetric reflection; period 2n folding, valid for any index.
inline int reflect_index(long long i, int n) {
  long long period = 2LL * n;
  long long m = i % period;
  if (m < 0) m += period;
  if (m >= n) m = period - 1 - m;
  return static_cast<int>(m);
}

std::vector<double> gaussian_kernel(double sigma_px) {
  int radius = static_cast<int>(std::ceil(4.5 * sigma_px));
  if (radius < 1) radius = 1;
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-0.5 * (i / sigma_px) * (i / sigma_px));
    k[i + radius] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

Image2D gaussian_blur(const Image2D& img, double sigma_um) {
  if (sigma_um < 0.0)
    throw std::invalid_argument("gaussian_blur: sigma must be >= 0");
  if (sigma_um == 0.0) return img;

  double sigma_px = sigma_um / img.pitch_um;
  std::vector<double> kernel = gaussian_kernel(sigma_px);
  int radius = static_cast<int>(kernel.size()) / 2;

  // Horizontal pass, then vertical; symmetric reflection at the borders
  // keeps the total sum exact for the normalized symmetric kernel.
  Image2D tmp(img.width, img.height, img.pitch_um);
  parallel::for_each_index(img.height, [&](std::size_t r) {
    const double* src = &img.values[r * img.width];
    double* dst = &tmp.values[r * img.width];
    for (int c = 0; c < img.width; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[k + radius] * src[reflect_index(c + k, img.width)];
      dst[c] = acc;
    }
  });

  Image2D out(img.width, img.height, img.pitch_um);
  parallel::for_each_index(img.width, [&](std::size_t c) {
    for (int r = 0; r < img.height; ++r) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[k + radius] *
               tmp.values[static_cast<std::size_t>(
                              reflect_index(r + k, img.height)) *
                              img.width +
                          c];
      out.values[static_cast<std::size_t>(r) * img.width + c] = acc;
    }
  });
  return out;
}

namespace {

// Marks bins within `halfwidth` of any nonzero harmonic of n/period.
std::vector<char> notch_bins(int n, int period_px, int halfwidth) {
  std::vector<char> notch(n, 0);
  double fundamental = static_cast<double>(n) / period_px;
  for (int k = 0; k < n; ++k) {
    double folded = std::min(k, n - k);
    int m = static_cast<int>(std::llround(folded / fundamental));
    if (m >= 1 && std::fabs(folded - m * fundamental) <= halfwidth + 1e-9)
      notch[k] = 1;
  }
  return notch;
}

}  // namespace

Image2D fft_notch_filter(const Image2D& img, int period_px,
                         int notch_halfwidth) {
  if (period_px < 2)
    throw std::invalid_argument("fft_notch_filter: period must be >= 2 px");
  if (period_px > img.width || period_px > img.height)
    throw std::invalid_argument(
        "fft_notch_filter: period larger than the image");
  if (notch_halfwidth < 0)
    throw std::invalid_argument("fft_notch_filter: halfwidth must be >= 0");

  std::vector<std::complex<double>> spec(img.pixel_count());
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = img.values[i];
  fft::transform2d(spec.data(), img.height, img.width, -1);

  std::vector<char> notch_col = notch_bins(img.width, period_px,
                                           notch_halfwidth);
  std::vector<char> notch_row = notch_bins(img.height, period_px,
                                           notch_halfwidth);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      if (r == 0 && c == 0) continue;  // DC preserved
      if (notch_row[r] || notch_col[c])
        spec[static_cast<std::size_t>(r) * img.width + c] = 0.0;
    }
  }

  fft::transform2d(spec.data(), img.height, img.width, 1);
  Image2D out(img.width, img.height, img.pitch_um);
  double scale = 1.0 / static_cast<double>(img.pixel_count());
  for (std::size_t i = 0; i < spec.size(); ++i)
    out.values[i] = spec[i].real() * scale;
  return out;
}

double block_boundary_energy(const Image2D& img, int period) {
  if (period < 1)
    throw std::invalid_argument("block_boundary_energy: period must be >= 1");
  double energy = 0.0;
  for (int c = period; c < img.width; c += period)
    for (int r = 0; r < img.height; ++r) {
      double d = img.at(r, c) - img.at(r, c - 1);
      energy += d * d;
    }
  for (int r = period; r < img.height; r += period)
    for (int c = 0; c < img.width; ++c) {
      double d = img.at(r, c) - img.at(r - 1, c);
      energy += d * d;
    }
  return energy;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  if (q < 0.0 || q > 1.0)
    throw std::invalid_argument("quantile: q must be in [0, 1]");
  double pos = q * static_cast<double>(values.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  std::nth_element(values.begin(), values.begin() + lo, values.end());
  double v_lo = values[lo];
  if (lo + 1 >= values.size() || pos == static_cast<double>(lo)) return v_lo;
  double v_hi = *std::min_element(values.begin() + lo + 1, values.end());
  return v_lo + (pos - static_cast<double>(lo)) * (v_hi - v_lo);
}

}  // namespace ngi
