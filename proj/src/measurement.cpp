#include "ngi/measurement.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ngi/parallel.hpp"
#include "ngi/rng.hpp"

namespace ngi {

TransmissionMap TransmissionMap::from_image(Image2D img) {
  for (double v : img.values)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument(
          "TransmissionMap: values must lie in [0, 1]");
  return TransmissionMap{std::move(img)};
}

int zoom_factor(const BucketGrid& grid, int frame_width, int frame_height) {
  if (grid.rows < 1 || grid.cols < 1)
    throw std::invalid_argument("bucket grid must be at least 1x1");
  if (frame_width % grid.cols != 0 || frame_height % grid.rows != 0)
    throw std::invalid_argument("bucket grid does not tile the frame");
  int zx = frame_width / grid.cols;
  int zy = frame_height / grid.rows;
  if (zx != zy)
    throw std::invalid_argument(
        "bucket grid requires a square zoom factor (got " +
        std::to_string(zx) + "x" + std::to_string(zy) + ")");
  return zx;
}

std::vector<double> BucketSeries::scalar_series() const {
  if (rows != 1 || cols != 1)
    throw std::invalid_argument("scalar_series: series is not 1x1");
  return values;
}

double bucket_signal(const Image2D& frame, const TransmissionMap& sample) {
  if (!frame.same_shape(sample.image))
    throw std::invalid_argument("bucket_signal: dimension mismatch");
  double b = 0.0;
  for (std::size_t i = 0; i < frame.values.size(); ++i)
    b += frame.values[i] * sample.image.values[i];
  return b;
}

std::vector<double> bucket_array_signals(const Image2D& frame,
                                         const TransmissionMap& sample,
                                         const BucketGrid& grid) {
  if (!frame.same_shape(sample.image))
    throw std::invalid_argument("bucket_array_signals: dimension mismatch");
  int zoom = zoom_factor(grid, frame.width, frame.height);
  std::vector<double> out(static_cast<std::size_t>(grid.rows) * grid.cols,
                          0.0);
  for (int r = 0; r < frame.height; ++r) {
    const double* fv = &frame.values[static_cast<std::size_t>(r) * frame.width];
    const double* tv =
        &sample.image.values[static_cast<std::size_t>(r) * frame.width];
    double* row_out = &out[static_cast<std::size_t>(r / zoom) * grid.cols];
    for (int c = 0; c < frame.width; ++c)
      row_out[c / zoom] += fv[c] * tv[c];
  }
  return out;
}

BucketSeries simulate_bucket_series(const SpeckleEnsemble& ensemble,
                                    const TransmissionMap& sample,
                                    const BucketGrid& grid,
                                    const BucketNoise& noise,
                                    double exposure_s, std::uint64_t seed) {
  if (ensemble.frames.empty())
    throw std::invalid_argument("simulate_bucket_series: empty ensemble");
  if (!(exposure_s > 0.0))
    throw std::invalid_argument("simulate_bucket_series: exposure must be > 0");
  int zoom = zoom_factor(grid, ensemble.frame_width(), ensemble.frame_height());

  double counts_per_unit =
      noise.counts_per_unit > 0.0 ? noise.counts_per_unit
                                  : ensemble.counts_per_unit;
  if (noise.enabled && !(counts_per_unit > 0.0))
    throw std::invalid_argument(
        "simulate_bucket_series: noise requires a counts-per-unit scale");
  // Expected counts follow the exposure ratio relative to the ensemble's
  // reference exposure.
  double counts_scale = counts_per_unit * exposure_s / ensemble.exposure_s;

  BucketSeries series;
  series.rows = grid.rows;
  series.cols = grid.cols;
  series.bucket_pitch_mm = zoom * ensemble.pitch_um() * 1e-3;
  series.angles_deg = ensemble.angles_deg;
  series.exposure_s = exposure_s;
  series.values.assign(
      ensemble.count() * static_cast<std::size_t>(grid.rows) * grid.cols, 0.0);

  const std::size_t per_entry = static_cast<std::size_t>(grid.rows) * grid.cols;
  parallel::for_each_index(ensemble.count(), [&](std::size_t j) {
    std::vector<double> buckets =
        bucket_array_signals(ensemble.frames[j], sample, grid);
    if (noise.enabled) {
      Rng rng = Rng::for_stream(seed ^ 0x6275636b65747321ULL, j);
      for (double& b : buckets) {
        double counts = static_cast<double>(
            rng.next_poisson(std::max(0.0, b) * counts_scale));
        b = counts / counts_scale;
      }
    }
    std::copy(buckets.begin(), buckets.end(),
              series.values.begin() + j * per_entry);
  });
  return series;
}

// ---------------------------------------------------------------------------
// Phantoms

namespace {

constexpr double kPi = 3.14159265358979323846;

// Supersampled rasterization of an inside(x_mm, y_mm) predicate; the pixel
// value is the covered area fraction.
template <typename Inside>
Image2D rasterize(int width, int height, double pitch_um, int supersample,
                  Inside inside) {
  if (supersample < 1)
    throw std::invalid_argument("phantom: supersample must be >= 1");
  Image2D img(width, height, pitch_um);
  const double pitch_mm = pitch_um * 1e-3;
  const double sub = pitch_mm / supersample;
  parallel::for_each_index(height, [&](std::size_t r) {
    double y0 = (0.5 * (height - 1) - static_cast<double>(r)) * pitch_mm -
                pitch_mm / 2.0 + sub / 2.0;
    for (int c = 0; c < width; ++c) {
      double x0 = (c - 0.5 * (width - 1)) * pitch_mm - pitch_mm / 2.0 +
                  sub / 2.0;
      int hits = 0;
      for (int sy = 0; sy < supersample; ++sy)
        for (int sx = 0; sx < supersample; ++sx)
          if (inside(x0 + sx * sub, y0 + sy * sub)) ++hits;
      img.at(static_cast<int>(r), c) =
          static_cast<double>(hits) / (supersample * supersample);
    }
  });
  return img;
}

}  // namespace

TransmissionMap make_cd_stencil(int width, int height, double pitch_um,
                                std::span<const StencilHole> holes,
                                int supersample) {
  const double half_x = width * pitch_um * 1e-3 / 2.0;
  const double half_y = height * pitch_um * 1e-3 / 2.0;
  for (const StencilHole& h : holes) {
    double rad = h.diameter_mm / 2.0;
    if (!(rad > 0.0))
      throw std::invalid_argument("cd_stencil: hole diameter must be > 0");
    if (std::fabs(h.center_x_mm) + rad > half_x ||
        std::fabs(h.center_y_mm) + rad > half_y)
      throw std::invalid_argument("cd_stencil: hole outside the field of view");
  }
  Image2D img = rasterize(width, height, pitch_um, supersample,
                          [&](double x, double y) {
                            for (const StencilHole& h : holes) {
                              double dx = x - h.center_x_mm;
                              double dy = y - h.center_y_mm;
                              double rad = h.diameter_mm / 2.0;
                              if (dx * dx + dy * dy <= rad * rad) return true;
                            }
                            return false;
                          });
  return TransmissionMap{std::move(img)};
}

TransmissionMap make_resolution_star(int width, int height, double pitch_um,
                                     const StarParams& params,
                                     int supersample) {
  if (params.spoke_count < 1 || !(params.diameter_mm > 0.0))
    throw std::invalid_argument("resolution_star: invalid parameters");
  const double radius = params.diameter_mm / 2.0;
  const double period_rad = 2.0 * kPi / params.spoke_count;
  const double duty = (params.spoke_width_deg * kPi / 180.0) / period_rad;
  if (duty <= 0.0 || duty >= 1.0)
    throw std::invalid_argument(
        "resolution_star: spoke width must be inside the angular period");
  Image2D img = rasterize(
      width, height, pitch_um, supersample, [&](double x, double y) {
        double dx = x - params.center_x_mm;
        double dy = y - params.center_y_mm;
        if (dx * dx + dy * dy > radius * radius) return false;
        double phi = std::atan2(dy, dx);
        double frac = phi / period_rad - std::floor(phi / period_rad);
        return frac < duty;
      });
  return TransmissionMap{std::move(img)};
}

}  // namespace ngi
