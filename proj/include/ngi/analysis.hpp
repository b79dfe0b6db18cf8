#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ngi/image.hpp"

namespace ngi {

struct FRCCurve {
  std::vector<double> frequency_per_um;  // ring centres, strictly increasing
  std::vector<double> correlation;       // in [-1, 1] per ring
  std::vector<std::size_t> counts;       // spectral samples per ring
};

/// Fourier ring correlation of two same-shaped images:
/// FRC(r) = Re(sum F_a conj(F_b)) / sqrt(sum |F_a|^2 * sum |F_b|^2) over
/// annular rings of the 2D spectra, ring width in frequency bins.
FRCCurve frc(const Image2D& a, const Image2D& b, int ring_width = 1);

/// First downward crossing of the threshold, linearly interpolated between
/// ring centres; returns the crossing frequency in 1/um. Throws
/// std::runtime_error("resolution beyond Nyquist") if the curve never
/// crosses.
double frc_resolution(const FRCCurve& curve, double threshold = 0.5);

/// Half-bit criterion: first crossing of the ring-population-dependent curve
/// T(r) = (0.2071 + 1.9102/sqrt(n)) / (1.2071 + 0.9102/sqrt(n)).
double frc_resolution_half_bit(const FRCCurve& curve);

/// Conversion factor between Gaussian FWHM and sigma: FWHM = 2.3548 * sigma.
inline constexpr double kFwhmPerSigma = 2.354820045030949;

/// Full width at half of (max - baseline); the baseline is the median of the
/// outer 10% of samples and the half-crossings are linearly interpolated.
/// Throws on profiles without a unique maximum above the baseline.
double fwhm(std::span<const double> profile, double pitch_um);

struct SNRModel {
  double kappa = 0.0;       // speckle contrast, in [0, 1]
  double mask_count = 0.0;  // N
  double n_sample = 0.0;    // degrees of freedom of the sample, T_A / a
  double brightness = 0.0;  // source brightness
  double xi = 0.0;          // exposure/resolution constant of the finite-
                            // brightness model
};

enum class SnrRegime { high_brilliance, with_brightness };

/// high_brilliance: kappa * sqrt(N / n_sample).
/// with_brightness: (n_sample / (kappa^2 N) + Xi / brightness)^(-1/2).
double snr_predict(const SNRModel& model, SnrRegime regime);

/// Xi helper: c * total exposure time / resolution-element area (c = 1 by
/// default; the absolute scale is not pinned by the model).
double xi_constant(double total_exposure_s, double resolution_area_um2,
                   double c = 1.0);

/// (mean over support - mean over complement) / stddev over complement.
/// support is a same-shaped image whose nonzero pixels mark the support.
/// Returns +inf when the complement has zero variance; throws on degenerate
/// (empty or full) masks.
double empirical_snr(const Image2D& reconstruction, const Image2D& support);

/// Pearson correlation of the flattened images (mean-adjusted NCC).
double normalized_cross_correlation(const Image2D& a, const Image2D& b);

}  // namespace ngi
