#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ngi/image.hpp"

namespace ngi {

struct Grain {
  double x_mm = 0.0;  // transverse (beam is +z, rotation axis is y)
  double y_mm = 0.0;  // along the cylinder axis
  double z_mm = 0.0;
  double radius_mm = 0.0;
};

/// Annular cylindrical mask packed with absorbing spherical grains.
/// Axis along y; the beam travels along z through both sides of the annulus.
struct GrainMask {
  double inner_radius_mm = 20.0;
  double outer_radius_mm = 30.0;
  double axial_length_mm = 40.0;
  double grain_attenuation_per_mm = 0.113;
  double wall_attenuation_per_mm = 0.01;
  double wall_thickness_mm = 1.0;
  std::uint64_t seed = 0;
  std::vector<Grain> grains;
};

struct MaskConfig {
  double inner_radius_mm = 20.0;
  double outer_radius_mm = 30.0;
  double axial_length_mm = 40.0;
  double grain_diameter_mm = 1.3;
  double radius_jitter = 0.2;      // uniform +/- fraction of the nominal radius
  double packing_fraction = 0.35;  // grain volume / annulus volume
  double grain_attenuation_per_mm = 0.113;
  double wall_attenuation_per_mm = 0.01;
  double wall_thickness_mm = 1.0;
  double overlap_tolerance_mm = 0.0;  // permitted pairwise overlap depth
};

struct BeamGeometry {
  double source_distance_m = 9.8;
  double pinhole_diameter_mm = 9.8;
  double mask_to_detector_mm = 150.0;
  double brightness_n_cm2_s = 9.0e6;

  /// Beam divergence Theta = pinhole diameter / source distance.
  double divergence() const {
    return (pinhole_diameter_mm * 1e-3) / source_distance_m;
  }
  /// Penumbral blur sigma at the detector, micrometres.
  double penumbra_sigma_um() const {
    return mask_to_detector_mm * 1e3 * divergence();
  }
};

struct DetectorSpec {
  int width = 0;
  int height = 0;
  double pitch_um = 0.0;
};

/// Ordered stack of speckle illumination frames plus acquisition metadata.
struct SpeckleEnsemble {
  std::vector<Image2D> frames;
  std::vector<double> angles_deg;
  std::vector<double> axial_offsets_mm;
  double exposure_s = 1.0;
  /// Expected detector counts per pixel at unit intensity and the reference
  /// exposure above; 0 means "no counting statistics recorded".
  double counts_per_unit = 0.0;

  std::size_t count() const { return frames.size(); }
  int frame_width() const { return frames.empty() ? 0 : frames[0].width; }
  int frame_height() const { return frames.empty() ? 0 : frames[0].height; }
  double pitch_um() const { return frames.empty() ? 0.0 : frames[0].pitch_um; }
};

struct SpeckleNoise {
  bool enabled = false;
  /// Probability per pixel of a gamma-ray outlier replacing the value.
  double gamma_probability = 0.0;
  /// Outlier amplitude, in intensity units (far above the [0,1] signal).
  double gamma_amplitude = 50.0;
};

/// Random sequential addition of hard spheres into the annulus until the
/// target packing fraction is reached (+-2%). Deterministic per seed.
/// Throws std::runtime_error (reporting the achieved fraction) if the target
/// cannot be reached within the attempt budget.
GrainMask generate_mask(const MaskConfig& config, std::uint64_t seed);

/// Parallel-ray Beer-Lambert projection of the rotated/translated mask onto
/// the detector, followed by the penumbral Gaussian blur. Values in (0, 1].
/// Throws std::invalid_argument if the detector FOV is not narrower than the
/// inner cylinder diameter.
Image2D project_mask(const GrainMask& mask, double angle_deg,
                     double axial_offset_mm, const BeamGeometry& beam,
                     const DetectorSpec& detector);

/// One projected frame per angle; optional Poisson counting noise with mean
/// intensity * brightness * pixel area * exposure, renormalized back to
/// intensity units. Frames use independent RNG streams keyed by (seed, frame
/// index), so any subset may be generated concurrently with bit-identical
/// results.
SpeckleEnsemble generate_ensemble(const GrainMask& mask,
                                  std::span<const double> angles_deg,
                                  std::span<const double> axial_offsets_mm,
                                  const BeamGeometry& beam,
                                  const DetectorSpec& detector,
                                  double exposure_s, const SpeckleNoise& noise,
                                  std::uint64_t seed);

/// Robust Michelson visibility of the pooled pixel values:
/// (I_hi - I_lo) / (I_hi + I_lo) with I_lo/I_hi the percentile / (100 -
/// percentile) order statistics. Throws on an all-zero ensemble.
double speckle_contrast(const SpeckleEnsemble& ensemble,
                        double percentile = 1.0);

/// angles[j] = j * delta_theta_deg for j in [0, count).
std::vector<double> rotation_schedule(int count, double delta_theta_deg);

}  // namespace ngi
