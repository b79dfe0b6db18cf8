#include "ngi/recon.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "ngi/fft.hpp"
#include "ngi/parallel.hpp"
#include "ngi/rng.hpp"

namespace ngi {

namespace {

Image2D ensemble_mean(const SpeckleEnsemble& ensemble) {
  Image2D mean(ensemble.frame_width(), ensemble.frame_height(),
               ensemble.pitch_um());
  for (const Image2D& frame : ensemble.frames)
    for (std::size_t i = 0; i < mean.values.size(); ++i)
      mean.values[i] += frame.values[i];
  double inv = 1.0 / static_cast<double>(ensemble.count());
  for (double& v : mean.values) v *= inv;
  return mean;
}

struct TileRef {
  int row0 = 0, col0 = 0, rows = 0, cols = 0;
  std::size_t pixels() const {
    return static_cast<std::size_t>(rows) * cols;
  }
};

// <frame - mean, x> over the tile; x is tile-local row-major.
double tile_dot(const Image2D& frame, const Image2D& mean, const TileRef& t,
                const double* x) {
  double acc = 0.0;
  for (int r = 0; r < t.rows; ++r) {
    const double* f =
        &frame.values[static_cast<std::size_t>(t.row0 + r) * frame.width +
                      t.col0];
    const double* m =
        &mean.values[static_cast<std::size_t>(t.row0 + r) * mean.width +
                     t.col0];
    const double* xv = x + static_cast<std::size_t>(r) * t.cols;
    for (int c = 0; c < t.cols; ++c) acc += (f[c] - m[c]) * xv[c];
  }
  return acc;
}

// x += s * (frame - mean) over the tile.
void tile_axpy(const Image2D& frame, const Image2D& mean, const TileRef& t,
               double s, double* x) {
  for (int r = 0; r < t.rows; ++r) {
    const double* f =
        &frame.values[static_cast<std::size_t>(t.row0 + r) * frame.width +
                      t.col0];
    const double* m =
        &mean.values[static_cast<std::size_t>(t.row0 + r) * mean.width +
                     t.col0];
    double* xv = x + static_cast<std::size_t>(r) * t.cols;
    for (int c = 0; c < t.cols; ++c) xv[c] += s * (f[c] - m[c]);
  }
}

// Largest squared singular value of the tile system (rows = mean-subtracted
// frames restricted to the tile), by power iteration on A^T A.
double estimate_sigma_max_sq(const SpeckleEnsemble& ensemble,
                             const Image2D& mean, const TileRef& tile,
                             std::uint64_t stream) {
  const std::size_t n = tile.pixels();
  Rng rng = Rng::for_stream(0x900DC0DEULL, stream);
  std::vector<double> v(n), w(n);
  for (double& x : v) x = rng.next_double() - 0.5;

  double sigma_sq = 0.0;
  for (int iter = 0; iter < 20; ++iter) {
    std::fill(w.begin(), w.end(), 0.0);
    for (const Image2D& frame : ensemble.frames) {
      double d = tile_dot(frame, mean, tile, v.data());
      if (d != 0.0) tile_axpy(frame, mean, tile, d, w.data());
    }
    double vv = 0.0, vw = 0.0, ww = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      vv += v[i] * v[i];
      vw += v[i] * w[i];
      ww += w[i] * w[i];
    }
    if (ww == 0.0) return 0.0;  // zero operator on this tile
    sigma_sq = vw / vv;         // Rayleigh quotient
    double inv_norm = 1.0 / std::sqrt(ww);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] * inv_norm;
  }
  return sigma_sq;
}

std::vector<TileRef> make_tiles(int frame_width, int frame_height, int rows,
                                int cols) {
  int tile_h = frame_height / rows;
  int tile_w = frame_width / cols;
  std::vector<TileRef> tiles;
  tiles.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      tiles.push_back({r * tile_h, c * tile_w, tile_h, tile_w});
  return tiles;
}

// Mean-subtracted bucket series per tile: b[tile][j].
std::vector<std::vector<double>> centered_buckets(const BucketSeries& series) {
  const std::size_t n_tiles =
      static_cast<std::size_t>(series.rows) * series.cols;
  std::vector<std::vector<double>> b(n_tiles,
                                     std::vector<double>(series.count()));
  for (std::size_t t = 0; t < n_tiles; ++t) {
    double mean = 0.0;
    for (std::size_t j = 0; j < series.count(); ++j)
      mean += series.values[j * n_tiles + t];
    mean /= static_cast<double>(series.count());
    for (std::size_t j = 0; j < series.count(); ++j)
      b[t][j] = series.values[j * n_tiles + t] - mean;
  }
  return b;
}

// Joint Landweber over all tiles with shared regularization / deblocking of
// the assembled image. A 1x1 grid is the plain (global) IXC.
GhostImage landweber_joint(const SpeckleEnsemble& ensemble,
                           const BucketSeries& series,
                           const ReconConfig& config) {
  if (ensemble.count() < 2)
    throw std::invalid_argument("ixc: need at least 2 frames");
  if (series.count() != ensemble.count())
    throw std::invalid_argument("ixc: bucket count does not match ensemble");
  if (config.iterations < 1)
    throw std::invalid_argument("ixc: iterations must be >= 1");
  if (config.step_size < 0.0)
    throw std::invalid_argument("ixc: step size must be positive or 0 (auto)");

  const int W = ensemble.frame_width();
  const int H = ensemble.frame_height();
  zoom_factor(BucketGrid{series.rows, series.cols}, W, H);
  const int zoom = W / series.cols;
  const bool tiled = series.rows * series.cols > 1;
  const std::size_t N = ensemble.count();

  Image2D mean = ensemble_mean(ensemble);
  std::vector<TileRef> tiles = make_tiles(W, H, series.rows, series.cols);
  std::vector<std::vector<double>> b = centered_buckets(series);

  // Per-tile step sizes (auto: 1 / sigma_max^2 with a small safety margin).
  std::vector<double> step(tiles.size(), config.step_size);
  if (config.step_size == 0.0) {
    parallel::for_each_index(tiles.size(), [&](std::size_t t) {
      double s2 = estimate_sigma_max_sq(ensemble, mean, tiles[t], t);
      step[t] = s2 > 0.0 ? 1.0 / (1.01 * s2) : 0.0;
    });
  }

  Image2D x(W, H, ensemble.pitch_um());
  std::vector<double> residual_history;
  residual_history.reserve(config.iterations);
  std::vector<double> tile_misfit(tiles.size(), 0.0);
  std::vector<std::vector<double>> residual(tiles.size());
  std::vector<std::vector<double>> gradient(tiles.size());

  for (int iteration = 0; iteration < config.iterations; ++iteration) {
    parallel::for_each_index(tiles.size(), [&](std::size_t t) {
      const TileRef& tile = tiles[t];
      std::vector<double>& r = residual[t];
      std::vector<double>& g = gradient[t];
      r.assign(N, 0.0);
      g.assign(tile.pixels(), 0.0);

      // Gather the tile of the current estimate.
      std::vector<double> xt(tile.pixels());
      for (int tr = 0; tr < tile.rows; ++tr)
        std::copy(&x.values[static_cast<std::size_t>(tile.row0 + tr) * W +
                            tile.col0],
                  &x.values[static_cast<std::size_t>(tile.row0 + tr) * W +
                            tile.col0 + tile.cols],
                  &xt[static_cast<std::size_t>(tr) * tile.cols]);

      double misfit_sq = 0.0;
      for (std::size_t j = 0; j < N; ++j) {
        double rj = b[t][j] - tile_dot(ensemble.frames[j], mean, tile,
                                       xt.data());
        r[j] = rj;
        misfit_sq += rj * rj;
      }
      tile_misfit[t] = misfit_sq;

      for (std::size_t j = 0; j < N; ++j)
        if (r[j] != 0.0)
          tile_axpy(ensemble.frames[j], mean, tile, r[j], g.data());

      // Scatter the updated tile back.
      for (int tr = 0; tr < tile.rows; ++tr) {
        double* dst = &x.values[static_cast<std::size_t>(tile.row0 + tr) * W +
                                tile.col0];
        const double* gt = &g[static_cast<std::size_t>(tr) * tile.cols];
        const double* xv = &xt[static_cast<std::size_t>(tr) * tile.cols];
        for (int tc = 0; tc < tile.cols; ++tc)
          dst[tc] = xv[tc] + step[t] * gt[tc];
      }
    });

    double misfit_sq = 0.0;
    for (double m : tile_misfit) misfit_sq += m;  // fixed tile order
    double misfit = std::sqrt(misfit_sq);
    residual_history.push_back(misfit);
    if (misfit > 10.0 * residual_history.front() + 1e-300)
      throw std::runtime_error(
          "ixc: data misfit diverged; reduce the step size");

    if (config.regularizer != Regularizer::none &&
        config.regularizer_weight > 0.0)
      x = regularizer_step(x, config.regularizer, config.regularizer_weight);
    if (config.deblock && config.deblock_in_loop && tiled)
      x = fft_notch_filter(x, zoom, config.notch_halfwidth);
    if (config.nonnegativity)
      for (double& v : x.values) v = std::max(0.0, v);
  }

  if (config.deblock && !config.deblock_in_loop && tiled)
    x = fft_notch_filter(x, zoom, config.notch_halfwidth);

  GhostImage out;
  out.estimate = std::move(x);
  out.method = tiled ? "superres-ixc" : "ixc";
  out.iterations = config.iterations;
  out.residual_history = std::move(residual_history);
  return out;
}

GhostImage xc_tiled(const SpeckleEnsemble& ensemble, const BucketSeries& series,
                    const ReconConfig& config) {
  if (ensemble.count() < 2)
    throw std::invalid_argument("xc: need at least 2 frames for the mean");
  if (series.count() != ensemble.count())
    throw std::invalid_argument("xc: bucket count does not match ensemble");

  const int W = ensemble.frame_width();
  const int H = ensemble.frame_height();
  zoom_factor(BucketGrid{series.rows, series.cols}, W, H);
  const int zoom = W / series.cols;
  const bool tiled = series.rows * series.cols > 1;
  const std::size_t N = ensemble.count();

  std::vector<TileRef> tiles = make_tiles(W, H, series.rows, series.cols);
  std::vector<std::vector<double>> b = centered_buckets(series);

  Image2D x(W, H, ensemble.pitch_um());
  parallel::for_each_index(tiles.size(), [&](std::size_t t) {
    const TileRef& tile = tiles[t];
    for (std::size_t j = 0; j < N; ++j) {
      double w = b[t][j] / static_cast<double>(N);
      if (w == 0.0) continue;
      const Image2D& frame = ensemble.frames[j];
      for (int tr = 0; tr < tile.rows; ++tr) {
        const double* f =
            &frame.values[static_cast<std::size_t>(tile.row0 + tr) * W +
                          tile.col0];
        double* dst = &x.values[static_cast<std::size_t>(tile.row0 + tr) * W +
                                tile.col0];
        for (int tc = 0; tc < tile.cols; ++tc) dst[tc] += w * f[tc];
      }
    }
  });

  if (config.deblock && tiled)
    x = fft_notch_filter(x, zoom, config.notch_halfwidth);

  GhostImage out;
  out.estimate = std::move(x);
  out.method = tiled ? "superres-xc" : "xc";
  out.iterations = 0;
  return out;
}

}  // namespace

GhostImage xc_reconstruct(const SpeckleEnsemble& ensemble,
                          std::span<const double> buckets) {
  BucketSeries series;
  series.rows = 1;
  series.cols = 1;
  series.values.assign(buckets.begin(), buckets.end());
  series.angles_deg.assign(buckets.size(), 0.0);
  return xc_tiled(ensemble, series, ReconConfig{});
}

GhostImage ixc_reconstruct(const SpeckleEnsemble& ensemble,
                           std::span<const double> buckets,
                           const ReconConfig& config) {
  BucketSeries series;
  series.rows = 1;
  series.cols = 1;
  series.values.assign(buckets.begin(), buckets.end());
  series.angles_deg.assign(buckets.size(), 0.0);
  if (config.method == ReconMethod::xc) return xc_tiled(ensemble, series,
                                                        config);
  return landweber_joint(ensemble, series, config);
}

GhostImage superres_reconstruct(const SpeckleEnsemble& ensemble,
                                const BucketSeries& series,
                                const ReconConfig& config) {
  if (config.method == ReconMethod::xc) return xc_tiled(ensemble, series,
                                                        config);
  return landweber_joint(ensemble, series, config);
}

Image2D psf_autocovariance(const SpeckleEnsemble& ensemble) {
  if (ensemble.count() < 2)
    throw std::invalid_argument("psf_autocovariance: need at least 2 frames");
  const int W = ensemble.frame_width();
  const int H = ensemble.frame_height();
  const std::size_t npix = static_cast<std::size_t>(W) * H;
  const std::size_t N = ensemble.count();

  Image2D mean = ensemble_mean(ensemble);

  // Average circular power spectrum of the mean-subtracted frames,
  // accumulated over a fixed chunk partition so the result does not depend
  // on the degree of concurrency.
  const std::size_t n_chunks = std::min<std::size_t>(32, N);
  const std::size_t chunk_len = (N + n_chunks - 1) / n_chunks;
  std::vector<std::vector<double>> partial(n_chunks);
  parallel::for_each_index(n_chunks, [&](std::size_t chunk) {
    std::vector<double>& acc = partial[chunk];
    acc.assign(npix, 0.0);
    std::vector<std::complex<double>> spec(npix);
    std::size_t begin = chunk * chunk_len;
    std::size_t end = std::min(N, begin + chunk_len);
    for (std::size_t j = begin; j < end; ++j) {
      const Image2D& frame = ensemble.frames[j];
      for (std::size_t i = 0; i < npix; ++i)
        spec[i] = frame.values[i] - mean.values[i];
      fft::transform2d(spec.data(), H, W, -1);
      for (std::size_t i = 0; i < npix; ++i) acc[i] += std::norm(spec[i]);
    }
  });

  std::vector<std::complex<double>> power(npix, 0.0);
  for (const auto& acc : partial)
    for (std::size_t i = 0; i < npix; ++i) power[i] += acc[i];

  double total_power = 0.0;
  for (const auto& p : power) total_power += p.real();
  if (total_power <= 0.0)
    throw std::invalid_argument("psf_autocovariance: zero-variance ensemble");

  fft::transform2d(power.data(), H, W, 1);

  // Shift zero lag to the centre pixel.
  Image2D psf(W, H, ensemble.pitch_um());
  double scale = 1.0 / (static_cast<double>(N) * static_cast<double>(npix));
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      int sr = (r + H / 2) % H;
      int sc = (c + W / 2) % W;
      psf.at(sr, sc) =
          power[static_cast<std::size_t>(r) * W + c].real() * scale;
    }

  // Normalize to unit sum; if the lag sum is ill conditioned (it can vanish,
  // e.g. for one-hot frames), fall back to unit peak.
  double sum = total_sum(psf);
  double peak = 0.0;
  for (double v : psf.values) peak = std::max(peak, std::fabs(v));
  if (std::fabs(sum) > 1e-9 * peak * static_cast<double>(npix)) {
    for (double& v : psf.values) v /= sum;
  } else if (peak > 0.0) {
    for (double& v : psf.values) v /= peak;
  }
  return psf;
}

Image2D regularizer_step(const Image2D& estimate, Regularizer kind,
                         double weight) {
  if (weight < 0.0)
    throw std::invalid_argument("regularizer_step: weight must be >= 0");
  if (kind == Regularizer::none || weight == 0.0) return estimate;

  if (kind == Regularizer::gradient_sparsity) {
    // Exact proximal shrinkage of forward differences on disjoint pixel
    // pairs, alternating pair parity per axis. Flat regions are untouched;
    // each seam difference shrinks by at most `weight`.
    Image2D out = estimate;
    auto shrink_pair = [weight](double& a, double& b) {
      double d = b - a;
      double s = std::clamp(d, -weight, weight);
      a += s / 2.0;
      b -= s / 2.0;
    };
    for (int parity = 0; parity < 2; ++parity)
      for (int r = 0; r < out.height; ++r)
        for (int c = parity; c + 1 < out.width; c += 2)
          shrink_pair(out.at(r, c), out.at(r, c + 1));
    for (int parity = 0; parity < 2; ++parity)
      for (int c = 0; c < out.width; ++c)
        for (int r = parity; r + 1 < out.height; r += 2)
          shrink_pair(out.at(r, c), out.at(r + 1, c));
    return out;
  }

  if (kind == Regularizer::smoothness) {
    // Gradient step on the quadratic gradient penalty: x + weight * Lap(x),
    // 5-point stencil with reflected (Neumann) boundaries.
    Image2D out(estimate.width, estimate.height, estimate.pitch_um);
    for (int r = 0; r < estimate.height; ++r)
      for (int c = 0; c < estimate.width; ++c) {
        double center = estimate.at(r, c);
        double up = r > 0 ? estimate.at(r - 1, c) : center;
        double down = r + 1 < estimate.height ? estimate.at(r + 1, c) : center;
        double left = c > 0 ? estimate.at(r, c - 1) : center;
        double right = c + 1 < estimate.width ? estimate.at(r, c + 1) : center;
        out.at(r, c) =
            center + weight * (up + down + left + right - 4.0 * center);
      }
    return out;
  }

  throw std::invalid_argument("regularizer_step: unknown regularizer");
}

}  // namespace ngi
