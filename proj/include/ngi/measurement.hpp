#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ngi/image.hpp"
#include "ngi/mask.hpp"

namespace ngi {

/// Sample transmission map with values constrained to [0, 1].
struct TransmissionMap {
  Image2D image;

  /// Validates the range; throws std::invalid_argument on violation.
  static TransmissionMap from_image(Image2D img);
};

/// R x C array of bucket detectors tiling the speckle frame exactly. The
/// bucket pitch must be an integer multiple (the zoom factor) of the speckle
/// pixel pitch.
struct BucketGrid {
  int rows = 1;
  int cols = 1;
};

/// Zoom factor Z such that frame is tiled by rows x cols buckets of Z x Z
/// pixels. Throws std::invalid_argument if the grid does not tile the frame
/// with a single square zoom factor.
int zoom_factor(const BucketGrid& grid, int frame_width, int frame_height);

struct BucketSeries {
  std::vector<double> values;  // count * rows * cols, row-major per entry
  int rows = 1;
  int cols = 1;
  double bucket_pitch_mm = 0.0;
  std::vector<double> angles_deg;
  double exposure_s = 1.0;

  std::size_t count() const { return angles_deg.size(); }
  double at(std::size_t entry, int r, int c) const {
    return values[(entry * rows + r) * cols + c];
  }
  /// Flattens a 1x1 series to N scalars; throws if the grid is larger.
  std::vector<double> scalar_series() const;
};

/// Discrete bucket signal B = sum_pixels I(x,y) * T(x,y). The pixel-area
/// factor of the continuous integral is absorbed into the units.
double bucket_signal(const Image2D& frame, const TransmissionMap& sample);

/// Per-bucket-pixel signals, row-major R x C. Entries sum to the global
/// bucket signal.
std::vector<double> bucket_array_signals(const Image2D& frame,
                                         const TransmissionMap& sample,
                                         const BucketGrid& grid);

struct BucketNoise {
  bool enabled = false;
  /// Counts per transmission unit per pixel at the ensemble reference
  /// exposure; 0 means "take it from the ensemble metadata".
  double counts_per_unit = 0.0;
};

/// Bucket arrays for every ensemble frame; optional Poisson noise on counts
/// scaled by exposure_s / ensemble.exposure_s. Deterministic per seed.
BucketSeries simulate_bucket_series(const SpeckleEnsemble& ensemble,
                                    const TransmissionMap& sample,
                                    const BucketGrid& grid,
                                    const BucketNoise& noise,
                                    double exposure_s, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Built-in phantoms. Physical coordinates are millimetres with the origin at
// the image centre; transmission values are area fractions from supersampled
// rasterization, so they stay within [0, 1].

struct StencilHole {
  double center_x_mm = 0.0;
  double center_y_mm = 0.0;
  double diameter_mm = 1.0;
};

/// Opaque sheet (T = 0) with circular drill holes (T = 1). Holes must lie
/// inside the field of view.
TransmissionMap make_cd_stencil(int width, int height, double pitch_um,
                                std::span<const StencilHole> holes,
                                int supersample = 4);

struct StarParams {
  double diameter_mm = 20.0;
  int spoke_count = 128;
  double spoke_width_deg = 1.4;
  double center_x_mm = 0.0;
  double center_y_mm = 0.0;
};

/// Radial resolution star: spoke_count transparent lines of the given angular
/// width, alternating with opaque gaps, inside an otherwise opaque disc.
/// Offsetting the centre selects a quadrant.
TransmissionMap make_resolution_star(int width, int height, double pitch_um,
                                     const StarParams& params,
                                     int supersample = 4);

}  // namespace ngi
