#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ngi/analysis.hpp"
#include "ngi/mask.hpp"
#include "ngi/parallel.hpp"
#include "ngi/recon.hpp"
#include "support.hpp"

using ngi::BeamGeometry;
using ngi::DetectorSpec;
using ngi::GrainMask;
using ngi::MaskConfig;

namespace {

BeamGeometry sharp_beam() {
  BeamGeometry beam;
  beam.mask_to_detector_mm = 0.0;  // no penumbral blur
  return beam;
}

MaskConfig small_mask_config() {
  MaskConfig config;
  config.axial_length_mm = 10.0;
  config.packing_fraction = 0.3;
  config.radius_jitter = 0.0;
  return config;
}

}  // namespace

TEST_CASE("packing fraction zero gives an empty grain list") {
  MaskConfig config = small_mask_config();
  config.packing_fraction = 0.0;
  GrainMask mask = ngi::generate_mask(config, 1);
  CHECK(mask.grains.empty());
}

TEST_CASE("packing fractions beyond the RSA range are rejected") {
  MaskConfig config = small_mask_config();
  config.packing_fraction = 0.56;
  CHECK_THROWS_AS(ngi::generate_mask(config, 1), std::invalid_argument);
}

TEST_CASE("generated grains are non-overlapping and inside the annulus") {
  MaskConfig config = small_mask_config();
  GrainMask mask = ngi::generate_mask(config, 7);
  REQUIRE(mask.grains.size() > 100);

  // Exhaustive pairwise oracle: centre distances >= 1.3 mm (equal radii).
  for (std::size_t i = 0; i < mask.grains.size(); ++i) {
    const ngi::Grain& g = mask.grains[i];
    double radial = std::hypot(g.x_mm, g.z_mm);
    CHECK(radial - g.radius_mm >= config.inner_radius_mm - 1e-9);
    CHECK(radial + g.radius_mm <= config.outer_radius_mm + 1e-9);
    CHECK(std::fabs(g.y_mm) + g.radius_mm <=
          config.axial_length_mm / 2.0 + 1e-9);
    for (std::size_t j = i + 1; j < mask.grains.size(); ++j) {
      const ngi::Grain& h = mask.grains[j];
      double dist = std::sqrt((g.x_mm - h.x_mm) * (g.x_mm - h.x_mm) +
                              (g.y_mm - h.y_mm) * (g.y_mm - h.y_mm) +
                              (g.z_mm - h.z_mm) * (g.z_mm - h.z_mm));
      CHECK(dist >= 1.3 - 1e-9);
    }
  }

  // Achieved fraction lands within the contract.
  double volume = 0.0;
  for (const ngi::Grain& g : mask.grains)
    volume += 4.0 / 3.0 * testsupport::kPi * std::pow(g.radius_mm, 3);
  double annulus = testsupport::kPi *
                   (std::pow(config.outer_radius_mm, 2) -
                    std::pow(config.inner_radius_mm, 2)) *
                   config.axial_length_mm;
  CHECK(volume / annulus == doctest::Approx(0.3).epsilon(0.07));
}

TEST_CASE("mask generation is deterministic per seed") {
  MaskConfig config = small_mask_config();
  config.packing_fraction = 0.1;
  GrainMask a = ngi::generate_mask(config, 42);
  GrainMask b = ngi::generate_mask(config, 42);
  REQUIRE(a.grains.size() == b.grains.size());
  for (std::size_t i = 0; i < a.grains.size(); ++i) {
    CHECK(a.grains[i].x_mm == b.grains[i].x_mm);
    CHECK(a.grains[i].y_mm == b.grains[i].y_mm);
    CHECK(a.grains[i].z_mm == b.grains[i].z_mm);
    CHECK(a.grains[i].radius_mm == b.grains[i].radius_mm);
  }
  GrainMask c = ngi::generate_mask(config, 43);
  CHECK(a.grains[0].x_mm != c.grains[0].x_mm);
}

TEST_CASE("projecting an empty mask gives the constant wall factor") {
  MaskConfig config = small_mask_config();
  config.packing_fraction = 0.0;
  config.wall_attenuation_per_mm = 0.05;
  GrainMask mask = ngi::generate_mask(config, 1);
  DetectorSpec detector{16, 16, 100.0};
  ngi::Image2D img = ngi::project_mask(mask, 0.0, 0.0, sharp_beam(), detector);
  double expected = std::exp(-0.05 * 4.0 * config.wall_thickness_mm);
  for (double v : img.values) CHECK(v == doctest::Approx(expected));
}

TEST_CASE("a ray through a sphere centre sees the full chord") {
  GrainMask mask;
  mask.wall_attenuation_per_mm = 0.0;
  mask.grain_attenuation_per_mm = 0.8;
  // Grain centred on the rotation axis, so a centred detector pixel passes
  // through the sphere centre.
  mask.grains.push_back({0.0, 0.0, 25.0, 0.65});
  DetectorSpec detector{17, 17, 100.0};  // odd: centre pixel on the axis
  ngi::Image2D img = ngi::project_mask(mask, 0.0, 0.0, sharp_beam(), detector);
  double expected = std::exp(-0.8 * 2.0 * 0.65);
  CHECK(img.at(8, 8) == doctest::Approx(expected).epsilon(1e-12));
  // Far corner misses the grain entirely.
  CHECK(img.at(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("on-axis grains are symmetric under 180 degree rotation") {
  GrainMask mask;
  mask.grains.push_back({0.0, 0.2, 24.0, 0.65});
  DetectorSpec detector{16, 16, 100.0};
  ngi::Image2D a = ngi::project_mask(mask, 0.0, 0.0, sharp_beam(), detector);
  ngi::Image2D b = ngi::project_mask(mask, 180.0, 0.0, sharp_beam(), detector);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
}

TEST_CASE("a full revolution reproduces the angle-zero projection") {
  MaskConfig config = small_mask_config();
  config.packing_fraction = 0.1;
  GrainMask mask = ngi::generate_mask(config, 3);
  DetectorSpec detector{24, 24, 150.0};
  ngi::Image2D a = ngi::project_mask(mask, 0.0, 0.0, sharp_beam(), detector);
  ngi::Image2D b = ngi::project_mask(mask, 360.0, 0.0, sharp_beam(), detector);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    CHECK(std::fabs(a.values[i] - b.values[i]) <= 1e-9);
}

TEST_CASE("the detector FOV must stay inside the inner cylinder") {
  GrainMask mask;  // defaults: inner radius 20 mm
  DetectorSpec detector{256, 256, 200.0};  // 51.2 mm FOV
  CHECK_THROWS_AS(ngi::project_mask(mask, 0.0, 0.0, sharp_beam(), detector),
                  std::invalid_argument);
}

TEST_CASE("rotation schedule spans a full revolution at the acquisition step") {
  auto angles = ngi::rotation_schedule(1716, 0.21);
  CHECK(angles.size() == 1716);
  CHECK(angles[1] - angles[0] == doctest::Approx(0.21));
  double sweep = 1716 * 0.21;
  CHECK(sweep > 360.0);
  CHECK(sweep < 361.0);
}

TEST_CASE("single-angle ensemble equals the direct projection") {
  MaskConfig config = small_mask_config();
  config.packing_fraction = 0.05;
  GrainMask mask = ngi::generate_mask(config, 5);
  DetectorSpec detector{16, 16, 150.0};
  BeamGeometry beam = sharp_beam();
  std::vector<double> angles{33.0};
  auto ensemble = ngi::generate_ensemble(mask, angles, {}, beam, detector,
                                         40.0, {}, 11);
  ngi::Image2D direct = ngi::project_mask(mask, 33.0, 0.0, beam, detector);
  REQUIRE(ensemble.count() == 1);
  CHECK(ensemble.frames[0].values == direct.values);
  CHECK(ensemble.counts_per_unit > 0.0);
}

TEST_CASE("ensemble generation is deterministic with noise on") {
  MaskConfig config = small_mask_config();
  config.packing_fraction = 0.05;
  GrainMask mask = ngi::generate_mask(config, 6);
  DetectorSpec detector{16, 16, 150.0};
  BeamGeometry beam = sharp_beam();
  auto angles = ngi::rotation_schedule(4, 30.0);
  ngi::SpeckleNoise noise{true, 0.0, 50.0};
  auto a = ngi::generate_ensemble(mask, angles, {}, beam, detector, 40.0,
                                  noise, 77);
  auto b = ngi::generate_ensemble(mask, angles, {}, beam, detector, 40.0,
                                  noise, 77);
  for (std::size_t j = 0; j < a.count(); ++j)
    CHECK(a.frames[j].values == b.frames[j].values);
}

TEST_CASE("Poisson noise shrinks with exposure as 1/exposure") {
  MaskConfig config = small_mask_config();
  config.packing_fraction = 0.15;
  GrainMask mask = ngi::generate_mask(config, 8);
  DetectorSpec detector{32, 32, 150.0};
  BeamGeometry beam = sharp_beam();
  beam.brightness_n_cm2_s = 4.0e5;
  std::vector<double> angles{10.0};

  auto clean = ngi::generate_ensemble(mask, angles, {}, beam, detector, 1.0,
                                      {}, 9);
  ngi::SpeckleNoise noise{true, 0.0, 50.0};
  auto short_exp = ngi::generate_ensemble(mask, angles, {}, beam, detector,
                                          1.0, noise, 9);
  auto long_exp = ngi::generate_ensemble(mask, angles, {}, beam, detector,
                                         100.0, noise, 9);

  auto mse = [&](const ngi::SpeckleEnsemble& e) {
    double acc = 0.0;
    for (std::size_t i = 0; i < e.frames[0].values.size(); ++i) {
      double d = e.frames[0].values[i] - clean.frames[0].values[i];
      acc += d * d;
    }
    return acc / e.frames[0].values.size();
  };
  double ratio = mse(short_exp) / mse(long_exp);
  // Poisson variance scales as 1/exposure; 1024 pixels give ~10% scatter.
  CHECK(ratio == doctest::Approx(100.0).epsilon(0.35));
}

TEST_CASE("gamma outliers replace pixels at the configured rate") {
  MaskConfig config = small_mask_config();
  config.packing_fraction = 0.0;
  GrainMask mask = ngi::generate_mask(config, 2);
  DetectorSpec detector{64, 64, 150.0};
  BeamGeometry beam = sharp_beam();
  std::vector<double> angles{0.0};
  ngi::SpeckleNoise noise{true, 0.02, 50.0};
  auto ensemble = ngi::generate_ensemble(mask, angles, {}, beam, detector,
                                         40.0, noise, 21);
  std::size_t outliers = 0;
  for (double v : ensemble.frames[0].values)
    if (v == 50.0) ++outliers;
  double rate = static_cast<double>(outliers) / 4096.0;
  CHECK(rate == doctest::Approx(0.02).epsilon(0.5));
}

TEST_CASE("axial offsets translate the mask along its axis") {
  GrainMask mask;
  mask.grains.push_back({0.0, 0.0, 24.0, 0.65});
  DetectorSpec detector{16, 16, 100.0};
  // Shifting the mask up by one pixel pitch moves the shadow up one row
  // (row index 0 is the top of the frame).
  ngi::Image2D base = ngi::project_mask(mask, 0.0, 0.0, sharp_beam(),
                                        detector);
  ngi::Image2D shifted = ngi::project_mask(mask, 0.0, 0.1, sharp_beam(),
                                           detector);
  for (int r = 0; r + 1 < 16; ++r)
    for (int c = 0; c < 16; ++c)
      CHECK(shifted.at(r, c) == doctest::Approx(base.at(r + 1, c)));
}

TEST_CASE("speckle intensities stay within physical bounds") {
  MaskConfig config = small_mask_config();
  config.packing_fraction = 0.2;
  GrainMask mask = ngi::generate_mask(config, 4);
  DetectorSpec detector{24, 24, 150.0};
  BeamGeometry beam;  // with penumbral blur
  auto angles = ngi::rotation_schedule(3, 45.0);

  auto clean = ngi::generate_ensemble(mask, angles, {}, beam, detector, 40.0,
                                      {}, 17);
  for (const auto& frame : clean.frames)
    for (double v : frame.values) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
    }

  ngi::SpeckleNoise noise{true, 0.0, 50.0};
  beam.brightness_n_cm2_s = 1e4;  // strong counting noise
  auto noisy = ngi::generate_ensemble(mask, angles, {}, beam, detector, 40.0,
                                      noise, 17);
  for (const auto& frame : noisy.frames)
    for (double v : frame.values) CHECK(v >= 0.0);
}

TEST_CASE("frame generation is independent of the thread count") {
  MaskConfig config = small_mask_config();
  config.packing_fraction = 0.1;
  GrainMask mask = ngi::generate_mask(config, 13);
  DetectorSpec detector{16, 16, 150.0};
  BeamGeometry beam = sharp_beam();
  auto angles = ngi::rotation_schedule(6, 60.0);
  ngi::SpeckleNoise noise{true, 0.0, 50.0};

  ngi::parallel::set_threads(1);
  auto serial = ngi::generate_ensemble(mask, angles, {}, beam, detector, 40.0,
                                       noise, 23);
  ngi::parallel::set_threads(4);
  auto threaded = ngi::generate_ensemble(mask, angles, {}, beam, detector,
                                         40.0, noise, 23);
  ngi::parallel::set_threads(0);
  for (std::size_t j = 0; j < serial.count(); ++j)
    CHECK(serial.frames[j].values == threaded.frames[j].values);
}

TEST_CASE("speckle_contrast edge cases") {
  ngi::SpeckleEnsemble flat;
  flat.exposure_s = 1.0;
  flat.frames.push_back(ngi::Image2D(8, 8, 1.0, 0.6));
  flat.angles_deg.push_back(0.0);
  flat.axial_offsets_mm.push_back(0.0);
  CHECK(ngi::speckle_contrast(flat) == doctest::Approx(0.0));

  ngi::SpeckleEnsemble binary;
  binary.exposure_s = 1.0;
  ngi::Image2D frame(8, 8, 1.0, 0.0);
  for (int c = 0; c < 8; ++c)
    for (int r = 0; r < 4; ++r) frame.at(r, c) = 0.8;
  binary.frames.push_back(frame);
  binary.angles_deg.push_back(0.0);
  binary.axial_offsets_mm.push_back(0.0);
  CHECK(ngi::speckle_contrast(binary) == doctest::Approx(1.0));

  ngi::SpeckleEnsemble zero;
  zero.exposure_s = 1.0;
  zero.frames.push_back(ngi::Image2D(8, 8, 1.0, 0.0));
  zero.angles_deg.push_back(0.0);
  zero.axial_offsets_mm.push_back(0.0);
  CHECK_THROWS_AS(ngi::speckle_contrast(zero), std::invalid_argument);
}

TEST_CASE("the ensemble mean frame flattens as N grows") {
  MaskConfig config = small_mask_config();
  config.packing_fraction = 0.2;
  GrainMask mask = ngi::generate_mask(config, 12);
  DetectorSpec detector{32, 32, 150.0};
  BeamGeometry beam = sharp_beam();

  auto rel_std_of_mean = [&](int n) {
    auto angles = ngi::rotation_schedule(n, 360.0 / n);
    auto ensemble = ngi::generate_ensemble(mask, angles, {}, beam, detector,
                                           40.0, {}, 31);
    ngi::Image2D mean(32, 32, 150.0);
    for (const auto& f : ensemble.frames)
      for (std::size_t i = 0; i < mean.values.size(); ++i)
        mean.values[i] += f.values[i] / n;
    double mu = ngi::total_sum(mean) / mean.pixel_count();
    double var = 0.0;
    for (double v : mean.values) var += (v - mu) * (v - mu);
    return std::sqrt(var / mean.pixel_count()) / mu;
  };

  double s16 = rel_std_of_mean(16);
  double s64 = rel_std_of_mean(64);
  double s256 = rel_std_of_mean(256);
  CHECK(s64 < s16);
  CHECK(s256 < s64);
}

TEST_CASE("PSF width scales with the grain size") {
  // Linear (weak attenuation) regime: the autocovariance width tracks the
  // grain chord profile, so doubling the diameter doubles the PSF FWHM.
  auto psf_fwhm_for_diameter = [&](double diameter_mm) {
    MaskConfig config;
    config.axial_length_mm = 16.0;
    config.grain_diameter_mm = diameter_mm;
    config.radius_jitter = 0.0;
    config.packing_fraction = 0.25;
    config.grain_attenuation_per_mm = 0.05;
    GrainMask mask = ngi::generate_mask(config, 99);
    DetectorSpec detector{64, 64, 150.0};
    auto angles = ngi::rotation_schedule(96, 3.75);
    auto ensemble = ngi::generate_ensemble(mask, angles, {}, sharp_beam(),
                                           detector, 40.0, {}, 55);
    ngi::Image2D psf = ngi::psf_autocovariance(ensemble);
    std::vector<double> profile(psf.width);
    for (int c = 0; c < psf.width; ++c) profile[c] = psf.at(psf.height / 2, c);
    return ngi::fwhm(profile, psf.pitch_um);
  };

  double w1 = psf_fwhm_for_diameter(1.3);
  double w2 = psf_fwhm_for_diameter(2.6);
  CHECK(w2 / w1 == doctest::Approx(2.0).epsilon(0.25));
}
