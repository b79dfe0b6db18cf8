#pragma once

#include <span>
#include <string>
#include <vector>

#include "ngi/image.hpp"
#include "ngi/mask.hpp"
#include "ngi/measurement.hpp"

namespace ngi {

enum class ReconMethod { xc, ixc };
enum class Regularizer { none, gradient_sparsity, smoothness };

struct ReconConfig {
  ReconMethod method = ReconMethod::xc;
  int iterations = 128;
  /// Landweber step; 0 selects 1/sigma_max^2(A) estimated by power iteration.
  double step_size = 0.0;
  Regularizer regularizer = Regularizer::none;
  double regularizer_weight = 0.0;
  bool nonnegativity = false;
  bool deblock = false;
  int notch_halfwidth = 1;
  /// Apply the notch filter inside the iteration loop (regularized variant)
  /// rather than as a post-pass.
  bool deblock_in_loop = true;
};

struct GhostImage {
  Image2D estimate;
  std::string method;
  int iterations = 0;
  /// Data misfit ||b - A T^k|| for k = 0 .. iterations-1 (ixc only).
  std::vector<double> residual_history;
};

/// Cross-correlation reconstruction, the covariance estimator
///   estimate(x,y) = (1/N) sum_j (B_j - mean B) I_j(x,y).
/// Requires N >= 2.
GhostImage xc_reconstruct(const SpeckleEnsemble& ensemble,
                          std::span<const double> buckets);

/// Ensemble autocovariance under spatial stationarity, via FFT-based circular
/// autocorrelation of the mean-subtracted frames averaged over the ensemble.
/// Zero lag sits at pixel (height/2, width/2). Normalized to unit sum when
/// the sum is well conditioned, otherwise to unit peak.
Image2D psf_autocovariance(const SpeckleEnsemble& ensemble);

/// Landweber iteration on the mean-subtracted system A T = b (rows of A are
/// the mean-subtracted frames, b the mean-subtracted buckets), with optional
/// interleaved regularizer step and nonnegativity projection. Throws
/// std::runtime_error if the misfit grows 10x above its initial value.
GhostImage ixc_reconstruct(const SpeckleEnsemble& ensemble,
                           std::span<const double> buckets,
                           const ReconConfig& config);

/// One regularization step. gradient_sparsity: pairwise soft-threshold of
/// forward-difference gradients (threshold = weight), exact identity on flat
/// regions. smoothness: estimate + weight * discrete 5-point Laplacian.
/// weight = 0 is the identity for both.
Image2D regularizer_step(const Image2D& estimate, Regularizer kind,
                         double weight);

/// Ghost imaging per bucket pixel: reconstructs each bucket footprint from
/// the speckle content inside it and tiles the results. With config.deblock,
/// fft_notch_filter at the zoom period is applied inside the joint iteration
/// loop (ixc) or as a post-pass (xc).
GhostImage superres_reconstruct(const SpeckleEnsemble& ensemble,
                                const BucketSeries& series,
                                const ReconConfig& config);

}  // namespace ngi
