#include "support.hpp"

#include <Eigen/Dense>

#include "ngi/fft.hpp"

namespace testsupport {

ngi::SpeckleEnsemble stationary_ensemble(int size, std::size_t count,
                                         double smooth_sigma_px,
                                         std::uint64_t seed, double pitch_um) {
  // Periodic Gaussian transfer function sampled on the DFT grid.
  std::vector<double> transfer(static_cast<std::size_t>(size) * size);
  for (int r = 0; r < size; ++r) {
    double fy = (r <= size / 2 ? r : r - size) / static_cast<double>(size);
    for (int c = 0; c < size; ++c) {
      double fx = (c <= size / 2 ? c : c - size) / static_cast<double>(size);
      double f2 = fx * fx + fy * fy;
      transfer[static_cast<std::size_t>(r) * size + c] =
          std::exp(-2.0 * kPi * kPi * smooth_sigma_px * smooth_sigma_px * f2);
    }
  }

  ngi::SpeckleEnsemble ensemble;
  ensemble.exposure_s = 1.0;
  ensemble.frames.reserve(count);
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(size) *
                                         size);
  for (std::size_t j = 0; j < count; ++j) {
    ngi::Rng rng = ngi::Rng::for_stream(seed, j);
    ngi::Image2D frame(size, size, pitch_um);
    for (std::size_t i = 0; i < frame.values.size(); ++i)
      spec[i] = rng.next_double();
    ngi::fft::transform2d(spec.data(), size, size, -1);
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= transfer[i];
    ngi::fft::transform2d(spec.data(), size, size, 1);
    double scale = 1.0 / (static_cast<double>(size) * size);
    for (std::size_t i = 0; i < frame.values.size(); ++i)
      frame.values[i] = spec[i].real() * scale;
    ensemble.frames.push_back(std::move(frame));
    ensemble.angles_deg.push_back(static_cast<double>(j));
    ensemble.axial_offsets_mm.push_back(0.0);
  }
  return ensemble;
}

ngi::Image2D circular_convolve_direct(const ngi::Image2D& image,
                                      const ngi::Image2D& kernel_centered) {
  const int W = image.width;
  const int H = image.height;
  ngi::Image2D out(W, H, image.pitch_um);
  // kernel_centered holds lag (0,0) at (H/2, W/2).
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      double acc = 0.0;
      for (int kr = 0; kr < H; ++kr)
        for (int kc = 0; kc < W; ++kc) {
          int lag_r = kr - H / 2;
          int lag_c = kc - W / 2;
          int sr = ((r - lag_r) % H + H) % H;
          int sc = ((c - lag_c) % W + W) % W;
          acc += kernel_centered.at(kr, kc) * image.at(sr, sc);
        }
      out.at(r, c) = acc;
    }
  return out;
}

ngi::Image2D xc_brute_force(const ngi::SpeckleEnsemble& ensemble,
                            const std::vector<double>& buckets) {
  const std::size_t n = ensemble.count();
  double mean_bucket = 0.0;
  for (double b : buckets) mean_bucket += b;
  mean_bucket /= static_cast<double>(n);

  ngi::Image2D out(ensemble.frame_width(), ensemble.frame_height(),
                   ensemble.pitch_um());
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        acc += (buckets[j] - mean_bucket) * ensemble.frames[j].at(r, c);
      out.at(r, c) = acc / static_cast<double>(n);
    }
  return out;
}

std::vector<double> least_squares_oracle(const ngi::SpeckleEnsemble& ensemble,
                                         const std::vector<double>& buckets) {
  const std::size_t n = ensemble.count();
  const std::size_t p = ensemble.frames[0].pixel_count();

  Eigen::VectorXd mean_frame = Eigen::VectorXd::Zero(p);
  for (const ngi::Image2D& f : ensemble.frames)
    for (std::size_t i = 0; i < p; ++i) mean_frame(i) += f.values[i];
  mean_frame /= static_cast<double>(n);

  double mean_bucket = 0.0;
  for (double b : buckets) mean_bucket += b;
  mean_bucket /= static_cast<double>(n);

  Eigen::MatrixXd a(n, p);
  Eigen::VectorXd b(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < p; ++i)
      a(j, i) = ensemble.frames[j].values[i] - mean_frame(i);
    b(j) = buckets[j] - mean_bucket;
  }

  Eigen::VectorXd x =
      a.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
  return std::vector<double>(x.data(), x.data() + p);
}

}  // namespace testsupport
