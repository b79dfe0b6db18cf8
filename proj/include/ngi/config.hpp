#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ngi/mask.hpp"
#include "ngi/measurement.hpp"
#include "ngi/recon.hpp"

namespace ngi {

/// Full experiment description, parsed from a strict JSON document (unknown
/// keys are rejected).
struct ExperimentConfig {
  MaskConfig mask;
  BeamGeometry beam;
  DetectorSpec detector{256, 256, 51.4};

  struct Schedule {
    int count = 1716;
    double delta_theta_deg = 0.21;
    double axial_step_mm = 0.0;
  } schedule;

  struct Phantom {
    std::string kind = "cd_stencil";  // "cd_stencil" | "resolution_star"
    std::vector<StencilHole> holes;
    StarParams star;
  } phantom;

  BucketGrid bucket_grid;

  struct Recon {
    std::string method = "xc";  // "xc" | "ixc"
    int iterations = 128;
    double step_size = 0.0;  // 0 = auto
    std::string regularizer = "none";
    double regularizer_weight = 0.0;
    bool nonnegativity = false;
    bool deblock = false;
    int notch_halfwidth = 1;
    bool deblock_in_loop = true;
  } recon;

  struct Noise {
    bool enabled = true;
    double speckle_exposure_s = 40.0;
    double bucket_exposure_s = 5.0;
    double gamma_probability = 0.0;
  } noise;

  std::uint64_t seed = 1;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig load_experiment_config(const std::string& path);

/// Applies a dotted-path override like "recon.iterations=64" onto a JSON
/// document; values are parsed as JSON when possible, else taken as strings.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// The four experiment configurations (samples, bucket arrays, zoom factors)
/// with every linear dimension and the mask-position count scaled by `scale`.
ExperimentConfig experiment_preset(char which, double scale = 1.0);

TransmissionMap build_phantom(const ExperimentConfig& config);
ReconConfig build_recon_config(const ExperimentConfig::Recon& recon);

}  // namespace ngi
