#include "ngi/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include "ngi/fft.hpp"

namespace ngi {

FRCCurve frc(const Image2D& a, const Image2D& b, int ring_width) {
  if (!a.same_shape(b) || a.pitch_um != b.pitch_um)
    throw std::invalid_argument("frc: images must share dims and pitch");
  if (ring_width < 1)
    throw std::invalid_argument("frc: ring width must be >= 1 bin");

  const int W = a.width;
  const int H = a.height;
  const std::size_t npix = a.pixel_count();
  std::vector<std::complex<double>> fa(npix), fb(npix);
  for (std::size_t i = 0; i < npix; ++i) {
    fa[i] = a.values[i];
    fb[i] = b.values[i];
  }
  fft::transform2d(fa.data(), H, W, -1);
  fft::transform2d(fb.data(), H, W, -1);

  // Ring width in physical frequency; bins of the larger axis are the finer
  // sampling, so they set the ring raster.
  const double bin_per_um = 1.0 / (std::max(W, H) * a.pitch_um);
  const double ring_step = ring_width * bin_per_um;
  const double nyquist = 1.0 / (2.0 * a.pitch_um);

  std::size_t n_rings =
      static_cast<std::size_t>(std::floor(nyquist / ring_step)) + 1;
  std::vector<double> num(n_rings, 0.0), pow_a(n_rings, 0.0),
      pow_b(n_rings, 0.0);
  std::vector<std::size_t> counts(n_rings, 0);

  for (int r = 0; r < H; ++r) {
    double fy = (r <= H / 2 ? r : r - H) / (H * a.pitch_um);
    for (int c = 0; c < W; ++c) {
      double fx = (c <= W / 2 ? c : c - W) / (W * a.pitch_um);
      double freq = std::hypot(fx, fy);
      std::size_t ring = static_cast<std::size_t>(freq / ring_step);
      if (ring >= n_rings) continue;
      std::size_t i = static_cast<std::size_t>(r) * W + c;
      num[ring] += (fa[i] * std::conj(fb[i])).real();
      pow_a[ring] += std::norm(fa[i]);
      pow_b[ring] += std::norm(fb[i]);
      ++counts[ring];
    }
  }

  FRCCurve curve;
  for (std::size_t ring = 0; ring < n_rings; ++ring) {
    if (counts[ring] == 0) continue;
    double denom_sq = pow_a[ring] * pow_b[ring];
    double corr;
    if (denom_sq <= 0.0) {
      corr = 0.0;
    } else if (pow_a[ring] == pow_b[ring] && num[ring] == pow_a[ring]) {
      corr = 1.0;  // identical spectra ring-wise; avoid sqrt rounding
    } else {
      corr = num[ring] / std::sqrt(denom_sq);
    }
    curve.frequency_per_um.push_back((ring + 0.5) * ring_step);
    curve.correlation.push_back(corr);
    curve.counts.push_back(counts[ring]);
  }
  return curve;
}

namespace {

double first_crossing(const FRCCurve& curve,
                      const std::vector<double>& threshold) {
  const std::size_t n = curve.correlation.size();
  if (n == 0) throw std::invalid_argument("frc_resolution: empty curve");
  for (std::size_t i = 0; i < n; ++i) {
    if (curve.correlation[i] < threshold[i]) {
      if (i == 0) return curve.frequency_per_um[0];
      // Linear interpolation of the (correlation - threshold) sign change.
      double d0 = curve.correlation[i - 1] - threshold[i - 1];
      double d1 = curve.correlation[i] - threshold[i];
      double t = d0 / (d0 - d1);
      return curve.frequency_per_um[i - 1] +
             t * (curve.frequency_per_um[i] - curve.frequency_per_um[i - 1]);
    }
  }
  throw std::runtime_error("frc_resolution: resolution beyond Nyquist");
}

}  // namespace

double frc_resolution(const FRCCurve& curve, double threshold) {
  std::vector<double> level(curve.correlation.size(), threshold);
  return first_crossing(curve, level);
}

double frc_resolution_half_bit(const FRCCurve& curve) {
  std::vector<double> level(curve.correlation.size());
  for (std::size_t i = 0; i < curve.counts.size(); ++i) {
    double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(curve.counts[i]));
    level[i] = (0.2071 + 1.9102 * inv_sqrt_n) / (1.2071 + 0.9102 * inv_sqrt_n);
  }
  return first_crossing(curve, level);
}

double fwhm(std::span<const double> profile, double pitch_um) {
  if (profile.size() < 3)
    throw std::invalid_argument("fwhm: profile too short");
  if (!(pitch_um > 0.0))
    throw std::invalid_argument("fwhm: pitch must be > 0");

  // Baseline: median of the outer 10% of samples (5% from each end).
  std::size_t edge = std::max<std::size_t>(1, profile.size() / 20);
  std::vector<double> outer;
  outer.reserve(2 * edge);
  for (std::size_t i = 0; i < edge; ++i) {
    outer.push_back(profile[i]);
    outer.push_back(profile[profile.size() - 1 - i]);
  }
  std::sort(outer.begin(), outer.end());
  double baseline = outer.size() % 2 == 1
                        ? outer[outer.size() / 2]
                        : 0.5 * (outer[outer.size() / 2 - 1] +
                                 outer[outer.size() / 2]);

  std::size_t peak_index = 0;
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < profile.size(); ++i)
    if (profile[i] > peak) {
      peak = profile[i];
      peak_index = i;
    }
  if (!(peak > baseline))
    throw std::invalid_argument("fwhm: profile has no peak above baseline");

  double half = baseline + 0.5 * (peak - baseline);

  // Walk outward from the peak to the half-level crossings, interpolating.
  double left = 0.0;
  {
    std::size_t i = peak_index;
    while (i > 0 && profile[i] > half) --i;
    if (profile[i] > half) {
      left = 0.0;  // clipped at the profile edge
    } else {
      double t = (half - profile[i]) / (profile[i + 1] - profile[i]);
      left = static_cast<double>(i) + t;
    }
  }
  double right = static_cast<double>(profile.size() - 1);
  {
    std::size_t i = peak_index;
    while (i + 1 < profile.size() && profile[i] > half) ++i;
    if (profile[i] > half) {
      right = static_cast<double>(profile.size() - 1);
    } else {
      double t = (half - profile[i]) / (profile[i - 1] - profile[i]);
      right = static_cast<double>(i) - t;
    }
  }
  return (right - left) * pitch_um;
}

double snr_predict(const SNRModel& model, SnrRegime regime) {
  if (!(model.kappa > 0.0) || !(model.mask_count > 0.0) ||
      !(model.n_sample > 0.0))
    throw std::invalid_argument(
        "snr_predict: kappa, N and n_sample must be positive");
  double high = model.kappa * std::sqrt(model.mask_count / model.n_sample);
  if (regime == SnrRegime::high_brilliance) return high;
  if (!(model.brightness > 0.0) || !(model.xi > 0.0))
    throw std::invalid_argument(
        "snr_predict: finite-brightness regime needs brightness and Xi > 0");
  double term = model.n_sample / (model.kappa * model.kappa *
                                  model.mask_count) +
                model.xi / model.brightness;
  return 1.0 / std::sqrt(term);
}

double xi_constant(double total_exposure_s, double resolution_area_um2,
                   double c) {
  if (!(total_exposure_s > 0.0) || !(resolution_area_um2 > 0.0) || !(c > 0.0))
    throw std::invalid_argument("xi_constant: arguments must be positive");
  return c * total_exposure_s / resolution_area_um2;
}

double empirical_snr(const Image2D& reconstruction, const Image2D& support) {
  if (!reconstruction.same_shape(support))
    throw std::invalid_argument("empirical_snr: dimension mismatch");
  double sum_in = 0.0, sum_out = 0.0, sum_out_sq = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < reconstruction.values.size(); ++i) {
    double v = reconstruction.values[i];
    if (support.values[i] != 0.0) {
      sum_in += v;
      ++n_in;
    } else {
      sum_out += v;
      sum_out_sq += v * v;
      ++n_out;
    }
  }
  if (n_in == 0 || n_out < 2)
    throw std::invalid_argument("empirical_snr: degenerate support mask");
  double mean_in = sum_in / static_cast<double>(n_in);
  double mean_out = sum_out / static_cast<double>(n_out);
  double var_out = (sum_out_sq - sum_out * sum_out / n_out) /
                   static_cast<double>(n_out - 1);
  if (var_out <= 0.0) return std::numeric_limits<double>::infinity();
  return (mean_in - mean_out) / std::sqrt(var_out);
}

double normalized_cross_correlation(const Image2D& a, const Image2D& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("ncc: dimension mismatch");
  std::size_t n = a.values.size();
  double mean_a = total_sum(a) / n;
  double mean_b = total_sum(b) / n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double da = a.values[i] - mean_a;
    double db = b.values[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a <= 0.0 || var_b <= 0.0)
    throw std::invalid_argument("ncc: constant image");
  return cov / std::sqrt(var_a * var_b);
}

}  // namespace ngi
