// Command-line front end: simulate -> measure -> reconstruct -> analyze,
// plus `reproduce` which chains the four stages for the built-in experiment
// configurations.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ngi/analysis.hpp"
#include "ngi/config.hpp"
#include "ngi/image.hpp"
#include "ngi/mask.hpp"
#include "ngi/measurement.hpp"
#include "ngi/parallel.hpp"
#include "ngi/recon.hpp"
#include "ngi/stack_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
};

ngi::ExperimentConfig resolve_config(const CommonOptions& opts) {
  json doc = opts.config_path.empty()
                 ? ngi::experiment_config_to_json(ngi::ExperimentConfig{})
                 : [&] {
                     std::ifstream in(opts.config_path);
                     if (!in)
                       throw std::invalid_argument("cannot open config " +
                                                   opts.config_path);
                     return json::parse(in);
                   }();
  for (const std::string& assignment : opts.overrides)
    ngi::apply_override(doc, assignment);
  ngi::ExperimentConfig cfg = ngi::parse_experiment_config(doc);
  if (opts.seed_given) cfg.seed = opts.seed;
  return cfg;
}

void prepare_out_dir(const CommonOptions& opts) {
  fs::create_directories(opts.out_dir);
}

std::string out_path(const CommonOptions& opts, const std::string& name) {
  return (fs::path(opts.out_dir) / name).string();
}

double counts_per_unit(const ngi::ExperimentConfig& cfg, double exposure_s) {
  double pitch_cm = cfg.detector.pitch_um * 1e-4;
  return cfg.beam.brightness_n_cm2_s * pitch_cm * pitch_cm * exposure_s;
}

ngi::SpeckleEnsemble run_simulate(const ngi::ExperimentConfig& cfg,
                                  const CommonOptions& opts,
                                  bool write_outputs) {
  std::cerr << "[simulate] packing grains (fraction "
            << cfg.mask.packing_fraction << ")\n";
  ngi::GrainMask mask = ngi::generate_mask(cfg.mask, cfg.seed);
  std::cerr << "[simulate] " << mask.grains.size() << " grains; projecting "
            << cfg.schedule.count << " mask positions\n";
  auto angles = ngi::rotation_schedule(cfg.schedule.count,
                                       cfg.schedule.delta_theta_deg);
  std::vector<double> offsets;
  if (cfg.schedule.axial_step_mm != 0.0) {
    offsets.resize(angles.size());
    for (std::size_t j = 0; j < offsets.size(); ++j)
      offsets[j] = cfg.schedule.axial_step_mm * static_cast<double>(j);
  }
  ngi::SpeckleNoise noise;
  noise.enabled = cfg.noise.enabled;
  noise.gamma_probability = cfg.noise.gamma_probability;
  auto ensemble = ngi::generate_ensemble(mask, angles, offsets, cfg.beam,
                                         cfg.detector,
                                         cfg.noise.speckle_exposure_s, noise,
                                         cfg.seed);
  if (write_outputs) {
    ngi::write_ensemble_stack(out_path(opts, "speckle"), ensemble, cfg.seed);
    std::ofstream(out_path(opts, "config.json"))
        << ngi::experiment_config_to_json(cfg).dump(2) << "\n";
    std::cerr << "[simulate] wrote " << out_path(opts, "speckle")
              << ".{json,f32}\n";
  }
  return ensemble;
}

ngi::BucketSeries run_measure(const ngi::ExperimentConfig& cfg,
                              const ngi::SpeckleEnsemble& ensemble,
                              const ngi::TransmissionMap& phantom,
                              const CommonOptions& opts, bool write_outputs) {
  ngi::BucketNoise noise;
  noise.enabled = cfg.noise.enabled;
  noise.counts_per_unit = counts_per_unit(cfg, ensemble.exposure_s);
  auto series = ngi::simulate_bucket_series(
      ensemble, phantom, cfg.bucket_grid, noise, cfg.noise.bucket_exposure_s,
      cfg.seed);
  if (write_outputs) {
    ngi::write_bucket_csv(out_path(opts, "buckets.csv"), series);
    ngi::write_bucket_stack(out_path(opts, "buckets"), series);
    ngi::write_image_stack(out_path(opts, "phantom"), phantom.image);
    std::cerr << "[measure] wrote " << out_path(opts, "buckets.csv") << "\n";
  }
  return series;
}

// Threshold for the gradient-sparsity prox scales with the estimate, so the
// default derives from the robust range of the plain XC image.
double adaptive_weight(const ngi::SpeckleEnsemble& ensemble,
                       const ngi::BucketSeries& series,
                       ngi::Regularizer kind) {
  if (kind == ngi::Regularizer::smoothness) return 0.1;
  if (kind == ngi::Regularizer::gradient_sparsity) {
    ngi::ReconConfig xc_config;
    xc_config.method = ngi::ReconMethod::xc;
    auto xc = ngi::superres_reconstruct(ensemble, series, xc_config);
    double lo = ngi::quantile(xc.estimate.values, 0.01);
    double hi = ngi::quantile(xc.estimate.values, 0.99);
    return 0.02 * (hi - lo);
  }
  return 0.0;
}

ngi::GhostImage run_reconstruct(const ngi::SpeckleEnsemble& ensemble,
                                const ngi::BucketSeries& series,
                                const ngi::ReconConfig& config,
                                const CommonOptions& opts,
                                const std::string& stem, bool write_pgm) {
  auto t0 = std::chrono::steady_clock::now();
  ngi::GhostImage ghost = ngi::superres_reconstruct(ensemble, series, config);
  double wall_s = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();

  ngi::write_image_stack(out_path(opts, stem), ghost.estimate);
  if (!ghost.residual_history.empty()) {
    std::vector<double> iteration(ghost.residual_history.size());
    for (std::size_t i = 0; i < iteration.size(); ++i)
      iteration[i] = static_cast<double>(i);
    ngi::write_curve_csv(out_path(opts, stem + "_residuals.csv"), "iteration",
                         "misfit", iteration, ghost.residual_history);
  }
  if (write_pgm) ngi::write_pgm16(out_path(opts, stem + ".pgm"),
                                  ghost.estimate);

  std::ostringstream report;
  report << "method=" << ghost.method << "\n"
         << "iterations=" << ghost.iterations << "\n"
         << "width=" << ghost.estimate.width << "\n"
         << "height=" << ghost.estimate.height << "\n"
         << "wall_time_s=" << wall_s << "\n";
  std::ofstream(out_path(opts, stem + "_report.txt")) << report.str();
  std::cout << report.str();
  return ghost;
}

int run_reproduce(char experiment, double scale, bool no_noise,
                  const CommonOptions& opts) {
  ngi::ExperimentConfig cfg = ngi::experiment_preset(experiment, scale);
  if (opts.seed_given) cfg.seed = opts.seed;
  if (no_noise) cfg.noise.enabled = false;
  prepare_out_dir(opts);

  auto ensemble = run_simulate(cfg, opts, true);
  auto phantom = ngi::build_phantom(cfg);
  auto series = run_measure(cfg, ensemble, phantom, opts, true);

  // Column (i): the conventional coarse image, i.e. the mean bucket pattern.
  {
    ngi::Image2D coarse(series.cols, series.rows,
                        series.bucket_pitch_mm * 1e3);
    const std::size_t per_entry =
        static_cast<std::size_t>(series.rows) * series.cols;
    for (std::size_t j = 0; j < series.count(); ++j)
      for (std::size_t k = 0; k < per_entry; ++k)
        coarse.values[k] += series.values[j * per_entry + k] /
                            static_cast<double>(series.count());
    ngi::write_image_stack(out_path(opts, "coarse"), coarse);
    ngi::write_pgm16(out_path(opts, "coarse.pgm"), coarse);
  }

  // Column (v): the phantom at speckle resolution, blurred to the speckle
  // resolution limit (sigma 103 um).
  ngi::Image2D target = ngi::gaussian_blur(phantom.image, 103.0);
  ngi::write_image_stack(out_path(opts, "target"), target);
  ngi::write_pgm16(out_path(opts, "target.pgm"), target);

  // Columns (ii)-(iv).
  ngi::ReconConfig base = ngi::build_recon_config(cfg.recon);
  ngi::ReconConfig xc_config = base;
  xc_config.method = ngi::ReconMethod::xc;
  xc_config.deblock = false;
  std::cerr << "[reconstruct] xc\n";
  auto ghost_xc = run_reconstruct(ensemble, series, xc_config, opts,
                                  "recon_xc", true);

  ngi::ReconConfig ixc_config = base;
  ixc_config.method = ngi::ReconMethod::ixc;
  ixc_config.regularizer = ngi::Regularizer::none;
  ixc_config.deblock = false;
  std::cerr << "[reconstruct] ixc (" << ixc_config.iterations
            << " iterations)\n";
  auto ghost_ixc = run_reconstruct(ensemble, series, ixc_config, opts,
                                   "recon_ixc", true);

  ngi::ReconConfig reg_config = base;
  reg_config.method = ngi::ReconMethod::ixc;
  if (reg_config.regularizer_weight == 0.0)
    reg_config.regularizer_weight =
        adaptive_weight(ensemble, series, reg_config.regularizer);
  std::cerr << "[reconstruct] regularized ixc (weight "
            << reg_config.regularizer_weight << ")\n";
  auto ghost_reg = run_reconstruct(ensemble, series, reg_config, opts,
                                   "recon_ixc_reg", true);

  // Summary metrics.
  std::ostringstream summary;
  summary << "experiment=" << experiment << "\n"
          << "scale=" << scale << "\n"
          << "kappa=" << ngi::speckle_contrast(ensemble) << "\n";
  {
    ngi::Image2D psf = ngi::psf_autocovariance(ensemble);
    std::vector<double> profile(psf.width);
    for (int c = 0; c < psf.width; ++c) profile[c] = psf.at(psf.height / 2, c);
    summary << "psf_fwhm_um=" << ngi::fwhm(profile, psf.pitch_um) << "\n";
  }
  summary << "ncc_xc=" << ngi::normalized_cross_correlation(ghost_xc.estimate,
                                                            target)
          << "\n"
          << "ncc_ixc="
          << ngi::normalized_cross_correlation(ghost_ixc.estimate, target)
          << "\n"
          << "ncc_ixc_reg="
          << ngi::normalized_cross_correlation(ghost_reg.estimate, target)
          << "\n";
  std::ofstream(out_path(opts, "summary.txt")) << summary.str();
  std::cout << summary.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"computational neutron ghost imaging toolkit"};
  app.require_subcommand(1);

  CommonOptions opts;
  auto add_common = [&](CLI::App* sub, bool with_config) {
    sub->add_option("--threads", opts.threads,
                    "worker threads (0 = hardware concurrency)");
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--seed", opts.seed, "seed override")
        ->each([&](const std::string&) { opts.seed_given = true; });
    if (with_config) {
      sub->add_option("--config", opts.config_path, "experiment config JSON");
      sub->add_option("--set", opts.overrides,
                      "config override, e.g. recon.iterations=64");
    }
  };

  auto* sim = app.add_subcommand("simulate",
                                 "generate a speckle ensemble stack");
  add_common(sim, true);

  std::string ensemble_path;
  auto* measure = app.add_subcommand(
      "measure", "bucket measurements of the configured phantom");
  add_common(measure, true);
  measure->add_option("--ensemble", ensemble_path, "speckle stack stem")
      ->required();

  std::string buckets_path;
  std::string method = "xc";
  int iterations = 128;
  double step_size = 0.0;
  std::string regularizer = "none";
  double weight = -1.0;  // <0 selects the adaptive default
  bool nonneg = false, deblock = false, deblock_post = false, pgm = false;
  int notch_halfwidth = 1;
  auto add_recon_flags = [&](CLI::App* sub) {
    add_common(sub, false);
    sub->add_option("--ensemble", ensemble_path, "speckle stack stem")
        ->required();
    sub->add_option("--buckets", buckets_path,
                    "bucket series (.csv or stack stem)")
        ->required();
    sub->add_option("--method", method, "xc | ixc");
    sub->add_option("--iterations", iterations, "Landweber iterations");
    sub->add_option("--step", step_size, "explicit step size (0 = auto)");
    sub->add_option("--regularizer", regularizer,
                    "none | gradient_sparsity | smoothness");
    sub->add_option("--weight", weight,
                    "regularizer weight (negative = adaptive default)");
    sub->add_flag("--nonneg", nonneg, "project onto nonnegative images");
    sub->add_flag("--deblock", deblock, "notch-filter bucket boundaries");
    sub->add_flag("--deblock-post", deblock_post,
                  "apply the notch as a post-pass instead of in-loop");
    sub->add_option("--notch-halfwidth", notch_halfwidth,
                    "notch half-width in frequency bins");
    sub->add_flag("--pgm", pgm, "also export a 16-bit PGM preview");
  };
  auto* reconstruct = app.add_subcommand("reconstruct",
                                         "ghost-image reconstruction");
  add_recon_flags(reconstruct);
  auto* superres = app.add_subcommand(
      "superres", "per-bucket-pixel reconstruction (same as reconstruct)");
  add_recon_flags(superres);

  // analyze subsubcommands
  auto* analyze = app.add_subcommand("analyze", "speckle and image metrics");
  analyze->require_subcommand(1);
  std::string stack_a, stack_b;
  int ring_width = 1;
  double frc_threshold = 0.5;
  bool half_bit = false;
  auto* an_contrast = analyze->add_subcommand("contrast",
                                              "robust Michelson visibility");
  add_common(an_contrast, false);
  an_contrast->add_option("--ensemble", ensemble_path, "speckle stack stem")
      ->required();
  auto* an_psf = analyze->add_subcommand(
      "psf", "ensemble autocovariance PSF and its FWHM");
  add_common(an_psf, false);
  an_psf->add_option("--ensemble", ensemble_path, "speckle stack stem")
      ->required();
  auto* an_frc = analyze->add_subcommand("frc", "Fourier ring correlation");
  add_common(an_frc, false);
  an_frc->add_option("--stack", stack_a, "first image stack")->required();
  an_frc->add_option("--stack2", stack_b, "second image stack")->required();
  an_frc->add_option("--ring-width", ring_width, "ring width in bins");
  an_frc->add_option("--threshold", frc_threshold, "fixed FRC threshold");
  an_frc->add_flag("--half-bit", half_bit, "use the half-bit criterion");
  ngi::SNRModel snr_model;
  std::string snr_regime = "high_brilliance";
  auto* an_snr = analyze->add_subcommand("snr", "SNR model predictions");
  an_snr->add_option("--kappa", snr_model.kappa, "speckle contrast")
      ->required();
  an_snr->add_option("--count", snr_model.mask_count, "mask position count N")
      ->required();
  an_snr->add_option("--n-sample", snr_model.n_sample,
                     "sample degrees of freedom")
      ->required();
  an_snr->add_option("--brightness", snr_model.brightness,
                     "source brightness");
  an_snr->add_option("--xi", snr_model.xi, "exposure/resolution constant");

  char experiment = 'a';
  double scale = 1.0;
  bool no_noise = false;
  auto* reproduce = app.add_subcommand(
      "reproduce", "run a full built-in experiment end to end");
  add_common(reproduce, false);
  reproduce
      ->add_option("--experiment", experiment,
                   "experiment configuration: a, b, c or d")
      ->required();
  reproduce->add_option("--scale", scale, "linear scale factor in (0, 1]");
  reproduce->add_flag("--no-noise", no_noise, "disable counting noise");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  ngi::parallel::set_threads(opts.threads);

  try {
    if (sim->parsed()) {
      ngi::ExperimentConfig cfg = resolve_config(opts);
      prepare_out_dir(opts);
      run_simulate(cfg, opts, true);
      return 0;
    }
    if (measure->parsed()) {
      ngi::ExperimentConfig cfg = resolve_config(opts);
      prepare_out_dir(opts);
      auto ensemble = ngi::read_ensemble_stack(ensemble_path);
      cfg.detector = {ensemble.frame_width(), ensemble.frame_height(),
                      ensemble.pitch_um()};
      auto phantom = ngi::build_phantom(cfg);
      run_measure(cfg, ensemble, phantom, opts, true);
      return 0;
    }
    if (reconstruct->parsed() || superres->parsed()) {
      prepare_out_dir(opts);
      auto ensemble = ngi::read_ensemble_stack(ensemble_path);
      ngi::BucketSeries series =
          buckets_path.size() > 4 &&
                  buckets_path.substr(buckets_path.size() - 4) == ".csv"
              ? ngi::read_bucket_csv(buckets_path)
              : ngi::read_bucket_stack(buckets_path);
      ngi::ExperimentConfig::Recon recon;
      recon.method = method;
      recon.iterations = iterations;
      recon.step_size = step_size;
      recon.regularizer = regularizer;
      recon.regularizer_weight = weight < 0.0 ? 0.0 : weight;
      recon.nonnegativity = nonneg;
      recon.deblock = deblock;
      recon.notch_halfwidth = notch_halfwidth;
      recon.deblock_in_loop = !deblock_post;
      ngi::ReconConfig config = ngi::build_recon_config(recon);
      if (weight < 0.0 && config.regularizer != ngi::Regularizer::none)
        config.regularizer_weight =
            adaptive_weight(ensemble, series, config.regularizer);
      run_reconstruct(ensemble, series, config, opts, "recon", pgm);
      return 0;
    }
    if (an_contrast->parsed()) {
      auto ensemble = ngi::read_ensemble_stack(ensemble_path);
      std::cout << "kappa=" << ngi::speckle_contrast(ensemble) << "\n";
      return 0;
    }
    if (an_psf->parsed()) {
      auto ensemble = ngi::read_ensemble_stack(ensemble_path);
      ngi::Image2D psf = ngi::psf_autocovariance(ensemble);
      std::vector<double> row(psf.width), col(psf.height);
      for (int c = 0; c < psf.width; ++c) row[c] = psf.at(psf.height / 2, c);
      for (int r = 0; r < psf.height; ++r) col[r] = psf.at(r, psf.width / 2);
      std::cout << "psf_fwhm_row_um=" << ngi::fwhm(row, psf.pitch_um) << "\n"
                << "psf_fwhm_col_um=" << ngi::fwhm(col, psf.pitch_um) << "\n";
      if (opts.out_dir != ".") {
        prepare_out_dir(opts);
        ngi::write_image_stack(out_path(opts, "psf"), psf);
        std::vector<double> lag(psf.width);
        for (int c = 0; c < psf.width; ++c)
          lag[c] = (c - psf.width / 2) * psf.pitch_um;
        ngi::write_curve_csv(out_path(opts, "psf_profile.csv"), "lag_um",
                             "autocovariance", lag, row);
      }
      return 0;
    }
    if (an_frc->parsed()) {
      auto a = ngi::read_stack(stack_a);
      auto b = ngi::read_stack(stack_b);
      ngi::FRCCurve curve = ngi::frc(a.frames.at(0), b.frames.at(0),
                                     ring_width);
      if (opts.out_dir != ".") {
        prepare_out_dir(opts);
        ngi::write_curve_csv(out_path(opts, "frc.csv"), "frequency_per_um",
                             "correlation", curve.frequency_per_um,
                             curve.correlation);
      }
      try {
        double res = half_bit ? ngi::frc_resolution_half_bit(curve)
                              : ngi::frc_resolution(curve, frc_threshold);
        std::cout << "frc_resolution_per_um=" << res << "\n"
                  << "frc_resolution_um=" << 1.0 / res << "\n";
      } catch (const std::runtime_error&) {
        std::cout << "frc_resolution_per_um=none\n";
      }
      return 0;
    }
    if (an_snr->parsed()) {
      std::cout << "snr_high_brilliance="
                << ngi::snr_predict(snr_model,
                                    ngi::SnrRegime::high_brilliance)
                << "\n";
      if (snr_model.brightness > 0.0 && snr_model.xi > 0.0)
        std::cout << "snr_with_brightness="
                  << ngi::snr_predict(snr_model,
                                      ngi::SnrRegime::with_brightness)
                  << "\n";
      return 0;
    }
    if (reproduce->parsed())
      return run_reproduce(experiment, scale, no_noise, opts);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
