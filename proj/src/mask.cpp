#include "ngi/mask.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ngi/parallel.hpp"
#include "ngi/rng.hpp"

namespace ngi {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Uniform cell grid over the annulus bounding box for neighbour queries
// during packing. Cell edge = one max grain diameter, so overlaps can only
// occur within the 3x3x3 neighbourhood.
class PackingGrid {
 public:
  PackingGrid(double extent_xz_mm, double extent_y_mm, double cell_mm)
      : cell_(cell_mm),
        nx_(dim(extent_xz_mm)),
        ny_(dim(extent_y_mm)),
        origin_xz_(-extent_xz_mm / 2.0),
        origin_y_(-extent_y_mm / 2.0),
        cells_(static_cast<std::size_t>(nx_) * nx_ * ny_) {}

  void insert(const std::vector<Grain>& grains, std::size_t index) {
    cells_[cell_index(grains[index])].push_back(index);
  }

  bool overlaps(const std::vector<Grain>& grains, const Grain& g,
                double tolerance) const {
    int cx = coord(g.x_mm - origin_xz_);
    int cy = coord(g.y_mm - origin_y_);
    int cz = coord(g.z_mm - origin_xz_);
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          int x = cx + dx, y = cy + dy, z = cz + dz;
          if (x < 0 || y < 0 || z < 0 || x >= nx_ || y >= ny_ || z >= nx_)
            continue;
          for (std::size_t i :
               cells_[(static_cast<std::size_t>(z) * ny_ + y) * nx_ + x]) {
            const Grain& other = grains[i];
            double ddx = other.x_mm - g.x_mm;
            double ddy = other.y_mm - g.y_mm;
            double ddz = other.z_mm - g.z_mm;
            double min_dist = other.radius_mm + g.radius_mm - tolerance;
            if (ddx * ddx + ddy * ddy + ddz * ddz < min_dist * min_dist)
              return true;
          }
        }
    return false;
  }

  std::size_t cell_index(const Grain& g) const {
    int cx = coord(g.x_mm - origin_xz_);
    int cy = coord(g.y_mm - origin_y_);
    int cz = coord(g.z_mm - origin_xz_);
    return (static_cast<std::size_t>(cz) * ny_ + cy) * nx_ + cx;
  }

 private:
  int dim(double extent) const {
    return std::max(1, static_cast<int>(std::ceil(extent / cell_)) + 1);
  }
  int coord(double offset) const {
    int c = static_cast<int>(offset / cell_);
    return std::clamp(c, 0, std::max(nx_, ny_) - 1);
  }

  double cell_;
  int nx_, ny_;
  double origin_xz_, origin_y_;
  std::vector<std::vector<std::size_t>> cells_;
};

}  // namespace

GrainMask generate_mask(const MaskConfig& config, std::uint64_t seed) {
  if (!(config.inner_radius_mm > 0.0) ||
      config.inner_radius_mm >= config.outer_radius_mm)
    throw std::invalid_argument("generate_mask: need 0 < inner < outer radius");
  if (!(config.axial_length_mm > 0.0))
    throw std::invalid_argument("generate_mask: axial length must be > 0");
  if (config.packing_fraction < 0.0 || config.packing_fraction > 0.55)
    throw std::invalid_argument(
        "generate_mask: packing fraction must be in [0, 0.55]");

  GrainMask mask;
  mask.inner_radius_mm = config.inner_radius_mm;
  mask.outer_radius_mm = config.outer_radius_mm;
  mask.axial_length_mm = config.axial_length_mm;
  mask.grain_attenuation_per_mm = config.grain_attenuation_per_mm;
  mask.wall_attenuation_per_mm = config.wall_attenuation_per_mm;
  mask.wall_thickness_mm = config.wall_thickness_mm;
  mask.seed = seed;
  if (config.packing_fraction == 0.0) return mask;

  const double nominal_radius = config.grain_diameter_mm / 2.0;
  if (nominal_radius <= 0.0)
    throw std::invalid_argument("generate_mask: grain diameter must be > 0");

  const double annulus_volume =
      kPi *
      (config.outer_radius_mm * config.outer_radius_mm -
       config.inner_radius_mm * config.inner_radius_mm) *
      config.axial_length_mm;
  const double target_volume = config.packing_fraction * annulus_volume;
  const double max_radius = nominal_radius * (1.0 + config.radius_jitter);

  PackingGrid grid(2.0 * (config.outer_radius_mm + max_radius),
                   config.axial_length_mm + 2.0 * max_radius,
                   2.0 * max_radius);

  Rng rng(seed);
  double placed_volume = 0.0;
  long long consecutive_failures = 0;
  const long long failure_budget = 500000;

  while (placed_volume < target_volume) {
    double radius =
        nominal_radius *
        (1.0 + config.radius_jitter * (2.0 * rng.next_double() - 1.0));
    double r_lo = config.inner_radius_mm + radius;
    double r_hi = config.outer_radius_mm - radius;
    double y_half = config.axial_length_mm / 2.0 - radius;
    if (r_lo >= r_hi || y_half <= 0.0)
      throw std::runtime_error("generate_mask: grains do not fit the annulus");

    // Uniform over the shell volume: radial cdf is quadratic in r.
    double u = rng.next_double();
    double r = std::sqrt(u * (r_hi * r_hi - r_lo * r_lo) + r_lo * r_lo);
    double phi = 2.0 * kPi * rng.next_double();
    Grain g;
    g.x_mm = r * std::cos(phi);
    g.z_mm = r * std::sin(phi);
    g.y_mm = (2.0 * rng.next_double() - 1.0) * y_half;
    g.radius_mm = radius;

    if (grid.overlaps(mask.grains, g, config.overlap_tolerance_mm)) {
      if (++consecutive_failures > failure_budget) {
        double achieved = placed_volume / annulus_volume;
        if (achieved >= config.packing_fraction - 0.02) break;
        throw std::runtime_error(
            "generate_mask: packing stalled at fraction " +
            std::to_string(achieved) + " (target " +
            std::to_string(config.packing_fraction) + ")");
      }
      continue;
    }
    consecutive_failures = 0;
    mask.grains.push_back(g);
    grid.insert(mask.grains, mask.grains.size() - 1);
    placed_volume += (4.0 / 3.0) * kPi * radius * radius * radius;
  }
  return mask;
}

Image2D project_mask(const GrainMask& mask, double angle_deg,
                     double axial_offset_mm, const BeamGeometry& beam,
                     const DetectorSpec& detector) {
  if (detector.width < 1 || detector.height < 1 || !(detector.pitch_um > 0.0))
    throw std::invalid_argument("project_mask: invalid detector spec");
  const double fov_x_mm = detector.width * detector.pitch_um * 1e-3;
  const double fov_y_mm = detector.height * detector.pitch_um * 1e-3;
  if (fov_x_mm >= 2.0 * mask.inner_radius_mm ||
      fov_y_mm >= 2.0 * mask.inner_radius_mm)
    throw std::invalid_argument(
        "project_mask: detector FOV must be narrower than the inner cylinder "
        "diameter (speckle properties are only constant inside it)");

  // Rotate grain centres about the cylinder axis (y) and shift along it.
  // The ray through a detector pixel runs along z, so only the rotated (x, y)
  // position and the radius decide the chord length.
  const double theta = angle_deg * kPi / 180.0;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);

  double max_radius = 0.0;
  for (const Grain& g : mask.grains)
    max_radius = std::max(max_radius, g.radius_mm);

  const double half_x = fov_x_mm / 2.0;
  const double half_y = fov_y_mm / 2.0;

  struct FlatGrain {
    double x, y, r2, r;
  };
  std::vector<FlatGrain> active;
  active.reserve(mask.grains.size() / 4 + 16);
  for (const Grain& g : mask.grains) {
    double x = g.x_mm * cos_t + g.z_mm * sin_t;
    double y = g.y_mm + axial_offset_mm;
    if (std::fabs(x) > half_x + g.radius_mm) continue;
    if (std::fabs(y) > half_y + g.radius_mm) continue;
    active.push_back({x, y, g.radius_mm * g.radius_mm, g.radius_mm});
  }

  // Bin the active grains on the detector plane; cell edge = one max
  // diameter so a pixel only needs its 3x3 neighbourhood.
  const double cell = std::max(2.0 * max_radius, 1e-3);
  const int ncx = static_cast<int>(std::ceil(fov_x_mm / cell)) + 3;
  const int ncy = static_cast<int>(std::ceil(fov_y_mm / cell)) + 3;
  const double grid_x0 = -half_x - cell;
  const double grid_y0 = -half_y - cell;
  std::vector<std::vector<std::uint32_t>> cells(
      static_cast<std::size_t>(ncx) * ncy);
  for (std::uint32_t i = 0; i < active.size(); ++i) {
    int cx = std::clamp(static_cast<int>((active[i].x - grid_x0) / cell), 0,
                        ncx - 1);
    int cy = std::clamp(static_cast<int>((active[i].y - grid_y0) / cell), 0,
                        ncy - 1);
    cells[static_cast<std::size_t>(cy) * ncx + cx].push_back(i);
  }

  const double pitch_mm = detector.pitch_um * 1e-3;
  // Paraxial wall model: each of the 4 shell crossings contributes one wall
  // thickness (FOV << cylinder radius keeps the obliquity factor ~1).
  const double wall_factor =
      std::exp(-mask.wall_attenuation_per_mm * 4.0 * mask.wall_thickness_mm);
  const double mu = mask.grain_attenuation_per_mm;

  Image2D img(detector.width, detector.height, detector.pitch_um);
  for (int row = 0; row < detector.height; ++row) {
    double py = (0.5 * (detector.height - 1) - row) * pitch_mm;
    int cy = std::clamp(static_cast<int>((py - grid_y0) / cell), 1, ncy - 2);
    for (int col = 0; col < detector.width; ++col) {
      double px = (col - 0.5 * (detector.width - 1)) * pitch_mm;
      int cx = std::clamp(static_cast<int>((px - grid_x0) / cell), 1, ncx - 2);
      double path = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const auto& bucket =
              cells[static_cast<std::size_t>(cy + dy) * ncx + (cx + dx)];
          for (std::uint32_t i : bucket) {
            const FlatGrain& g = active[i];
            double ddx = px - g.x;
            double ddy = py - g.y;
            double d2 = ddx * ddx + ddy * ddy;
            if (d2 < g.r2) path += 2.0 * std::sqrt(g.r2 - d2);
          }
        }
      img.at(row, col) = wall_factor * std::exp(-mu * path);
    }
  }

  double sigma_um = beam.penumbra_sigma_um();
  if (sigma_um > 0.0) img = gaussian_blur(img, sigma_um);
  return img;
}

SpeckleEnsemble generate_ensemble(const GrainMask& mask,
                                  std::span<const double> angles_deg,
                                  std::span<const double> axial_offsets_mm,
                                  const BeamGeometry& beam,
                                  const DetectorSpec& detector,
                                  double exposure_s, const SpeckleNoise& noise,
                                  std::uint64_t seed) {
  if (angles_deg.empty())
    throw std::invalid_argument("generate_ensemble: empty angle list");
  if (!axial_offsets_mm.empty() && axial_offsets_mm.size() != angles_deg.size())
    throw std::invalid_argument(
        "generate_ensemble: axial offset list length mismatch");
  if (!(exposure_s > 0.0))
    throw std::invalid_argument("generate_ensemble: exposure must be > 0");

  const double pitch_cm = detector.pitch_um * 1e-4;
  const double counts_per_unit =
      beam.brightness_n_cm2_s * pitch_cm * pitch_cm * exposure_s;
  if (noise.enabled && !(counts_per_unit > 0.0))
    throw std::invalid_argument(
        "generate_ensemble: noise requires positive brightness and exposure");

  SpeckleEnsemble ensemble;
  ensemble.angles_deg.assign(angles_deg.begin(), angles_deg.end());
  ensemble.axial_offsets_mm.assign(angles_deg.size(), 0.0);
  if (!axial_offsets_mm.empty())
    ensemble.axial_offsets_mm.assign(axial_offsets_mm.begin(),
                                     axial_offsets_mm.end());
  ensemble.exposure_s = exposure_s;
  ensemble.counts_per_unit = counts_per_unit;
  ensemble.frames.resize(angles_deg.size());

  parallel::for_each_index(angles_deg.size(), [&](std::size_t j) {
    Image2D frame = project_mask(mask, ensemble.angles_deg[j],
                                 ensemble.axial_offsets_mm[j], beam, detector);
    if (noise.enabled) {
      Rng rng = Rng::for_stream(seed, j);
      for (double& v : frame.values) {
        double counts = static_cast<double>(
            rng.next_poisson(std::max(0.0, v) * counts_per_unit));
        v = counts / counts_per_unit;
        if (noise.gamma_probability > 0.0 &&
            rng.next_double() < noise.gamma_probability)
          v = noise.gamma_amplitude;
      }
    }
    ensemble.frames[j] = std::move(frame);
  });
  return ensemble;
}

double speckle_contrast(const SpeckleEnsemble& ensemble, double percentile) {
  if (ensemble.frames.empty())
    throw std::invalid_argument("speckle_contrast: empty ensemble");
  if (percentile < 0.0 || percentile >= 50.0)
    throw std::invalid_argument("speckle_contrast: percentile out of range");

  std::vector<double> pooled;
  pooled.reserve(ensemble.count() * ensemble.frames[0].pixel_count());
  bool any_positive = false;
  for (const Image2D& frame : ensemble.frames) {
    for (double v : frame.values) {
      if (v < 0.0)
        throw std::invalid_argument("speckle_contrast: negative intensity");
      if (v > 0.0) any_positive = true;
      pooled.push_back(v);
    }
  }
  if (!any_positive)
    throw std::invalid_argument("speckle_contrast: all-zero ensemble");

  auto order_stat = [&](double q) {
    double pos = q * static_cast<double>(pooled.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::nth_element(pooled.begin(), pooled.begin() + lo, pooled.end());
    double v_lo = pooled[lo];
    if (lo + 1 >= pooled.size() || pos == static_cast<double>(lo)) return v_lo;
    double v_hi = *std::min_element(pooled.begin() + lo + 1, pooled.end());
    return v_lo + (pos - static_cast<double>(lo)) * (v_hi - v_lo);
  };

  double lo = order_stat(percentile / 100.0);
  double hi = order_stat(1.0 - percentile / 100.0);
  return (hi - lo) / (hi + lo);
}

std::vector<double> rotation_schedule(int count, double delta_theta_deg) {
  if (count < 1)
    throw std::invalid_argument("rotation_schedule: count must be >= 1");
  std::vector<double> angles(count);
  for (int j = 0; j < count; ++j) angles[j] = j * delta_theta_deg;
  return angles;
}

}  // namespace ngi
