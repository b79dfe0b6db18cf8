#include "ngi/config.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ngi {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> keys,
                    const std::string& where) {
  if (!obj.is_object())
    throw std::invalid_argument("config: " + where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw std::invalid_argument("config: unknown key '" + it.key() +
                                  "' in " + where);
  }
}

template <typename T>
void fetch(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& doc) {
  reject_unknown(doc,
                 {"mask", "beam", "detector", "schedule", "phantom",
                  "bucket_grid", "recon", "noise", "seed"},
                 "root");
  ExperimentConfig cfg;

  if (doc.contains("mask")) {
    const json& m = doc.at("mask");
    reject_unknown(m,
                   {"inner_radius_mm", "outer_radius_mm", "axial_length_mm",
                    "grain_diameter_mm", "radius_jitter", "packing_fraction",
                    "grain_attenuation_per_mm", "wall_attenuation_per_mm",
                    "wall_thickness_mm", "overlap_tolerance_mm"},
                   "mask");
    fetch(m, "inner_radius_mm", cfg.mask.inner_radius_mm);
    fetch(m, "outer_radius_mm", cfg.mask.outer_radius_mm);
    fetch(m, "axial_length_mm", cfg.mask.axial_length_mm);
    fetch(m, "grain_diameter_mm", cfg.mask.grain_diameter_mm);
    fetch(m, "radius_jitter", cfg.mask.radius_jitter);
    fetch(m, "packing_fraction", cfg.mask.packing_fraction);
    fetch(m, "grain_attenuation_per_mm", cfg.mask.grain_attenuation_per_mm);
    fetch(m, "wall_attenuation_per_mm", cfg.mask.wall_attenuation_per_mm);
    fetch(m, "wall_thickness_mm", cfg.mask.wall_thickness_mm);
    fetch(m, "overlap_tolerance_mm", cfg.mask.overlap_tolerance_mm);
  }
  if (doc.contains("beam")) {
    const json& b = doc.at("beam");
    reject_unknown(b,
                   {"source_distance_m", "pinhole_diameter_mm",
                    "mask_to_detector_mm", "brightness_n_cm2_s"},
                   "beam");
    fetch(b, "source_distance_m", cfg.beam.source_distance_m);
    fetch(b, "pinhole_diameter_mm", cfg.beam.pinhole_diameter_mm);
    fetch(b, "mask_to_detector_mm", cfg.beam.mask_to_detector_mm);
    fetch(b, "brightness_n_cm2_s", cfg.beam.brightness_n_cm2_s);
  }
  if (doc.contains("detector")) {
    const json& d = doc.at("detector");
    reject_unknown(d, {"width", "height", "pitch_um"}, "detector");
    fetch(d, "width", cfg.detector.width);
    fetch(d, "height", cfg.detector.height);
    fetch(d, "pitch_um", cfg.detector.pitch_um);
  }
  if (doc.contains("schedule")) {
    const json& s = doc.at("schedule");
    reject_unknown(s, {"count", "delta_theta_deg", "axial_step_mm"},
                   "schedule");
    fetch(s, "count", cfg.schedule.count);
    fetch(s, "delta_theta_deg", cfg.schedule.delta_theta_deg);
    fetch(s, "axial_step_mm", cfg.schedule.axial_step_mm);
  }
  if (doc.contains("phantom")) {
    const json& p = doc.at("phantom");
    reject_unknown(p, {"kind", "holes", "star"}, "phantom");
    fetch(p, "kind", cfg.phantom.kind);
    if (cfg.phantom.kind != "cd_stencil" &&
        cfg.phantom.kind != "resolution_star")
      throw std::invalid_argument("config: unknown phantom kind " +
                                  cfg.phantom.kind);
    if (p.contains("holes")) {
      cfg.phantom.holes.clear();
      for (const json& h : p.at("holes")) {
        reject_unknown(h, {"center_x_mm", "center_y_mm", "diameter_mm"},
                       "phantom.holes[]");
        StencilHole hole;
        fetch(h, "center_x_mm", hole.center_x_mm);
        fetch(h, "center_y_mm", hole.center_y_mm);
        fetch(h, "diameter_mm", hole.diameter_mm);
        cfg.phantom.holes.push_back(hole);
      }
    }
    if (p.contains("star")) {
      const json& s = p.at("star");
      reject_unknown(s,
                     {"diameter_mm", "spoke_count", "spoke_width_deg",
                      "center_x_mm", "center_y_mm"},
                     "phantom.star");
      fetch(s, "diameter_mm", cfg.phantom.star.diameter_mm);
      fetch(s, "spoke_count", cfg.phantom.star.spoke_count);
      fetch(s, "spoke_width_deg", cfg.phantom.star.spoke_width_deg);
      fetch(s, "center_x_mm", cfg.phantom.star.center_x_mm);
      fetch(s, "center_y_mm", cfg.phantom.star.center_y_mm);
    }
  }
  if (doc.contains("bucket_grid")) {
    const json& g = doc.at("bucket_grid");
    reject_unknown(g, {"rows", "cols"}, "bucket_grid");
    fetch(g, "rows", cfg.bucket_grid.rows);
    fetch(g, "cols", cfg.bucket_grid.cols);
  }
  if (doc.contains("recon")) {
    const json& r = doc.at("recon");
    reject_unknown(r,
                   {"method", "iterations", "step_size", "regularizer",
                    "regularizer_weight", "nonnegativity", "deblock",
                    "notch_halfwidth", "deblock_in_loop"},
                   "recon");
    fetch(r, "method", cfg.recon.method);
    fetch(r, "iterations", cfg.recon.iterations);
    fetch(r, "step_size", cfg.recon.step_size);
    fetch(r, "regularizer", cfg.recon.regularizer);
    fetch(r, "regularizer_weight", cfg.recon.regularizer_weight);
    fetch(r, "nonnegativity", cfg.recon.nonnegativity);
    fetch(r, "deblock", cfg.recon.deblock);
    fetch(r, "notch_halfwidth", cfg.recon.notch_halfwidth);
    fetch(r, "deblock_in_loop", cfg.recon.deblock_in_loop);
  }
  if (doc.contains("noise")) {
    const json& n = doc.at("noise");
    reject_unknown(n,
                   {"enabled", "speckle_exposure_s", "bucket_exposure_s",
                    "gamma_probability"},
                   "noise");
    fetch(n, "enabled", cfg.noise.enabled);
    fetch(n, "speckle_exposure_s", cfg.noise.speckle_exposure_s);
    fetch(n, "bucket_exposure_s", cfg.noise.bucket_exposure_s);
    fetch(n, "gamma_probability", cfg.noise.gamma_probability);
  }
  fetch(doc, "seed", cfg.seed);
  return cfg;
}

json experiment_config_to_json(const ExperimentConfig& c) {
  json doc;
  doc["mask"] = {{"inner_radius_mm", c.mask.inner_radius_mm},
                 {"outer_radius_mm", c.mask.outer_radius_mm},
                 {"axial_length_mm", c.mask.axial_length_mm},
                 {"grain_diameter_mm", c.mask.grain_diameter_mm},
                 {"radius_jitter", c.mask.radius_jitter},
                 {"packing_fraction", c.mask.packing_fraction},
                 {"grain_attenuation_per_mm", c.mask.grain_attenuation_per_mm},
                 {"wall_attenuation_per_mm", c.mask.wall_attenuation_per_mm},
                 {"wall_thickness_mm", c.mask.wall_thickness_mm},
                 {"overlap_tolerance_mm", c.mask.overlap_tolerance_mm}};
  doc["beam"] = {{"source_distance_m", c.beam.source_distance_m},
                 {"pinhole_diameter_mm", c.beam.pinhole_diameter_mm},
                 {"mask_to_detector_mm", c.beam.mask_to_detector_mm},
                 {"brightness_n_cm2_s", c.beam.brightness_n_cm2_s}};
  doc["detector"] = {{"width", c.detector.width},
                     {"height", c.detector.height},
                     {"pitch_um", c.detector.pitch_um}};
  doc["schedule"] = {{"count", c.schedule.count},
                     {"delta_theta_deg", c.schedule.delta_theta_deg},
                     {"axial_step_mm", c.schedule.axial_step_mm}};
  json holes = json::array();
  for (const StencilHole& h : c.phantom.holes)
    holes.push_back({{"center_x_mm", h.center_x_mm},
                     {"center_y_mm", h.center_y_mm},
                     {"diameter_mm", h.diameter_mm}});
  doc["phantom"] = {{"kind", c.phantom.kind},
                    {"holes", holes},
                    {"star",
                     {{"diameter_mm", c.phantom.star.diameter_mm},
                      {"spoke_count", c.phantom.star.spoke_count},
                      {"spoke_width_deg", c.phantom.star.spoke_width_deg},
                      {"center_x_mm", c.phantom.star.center_x_mm},
                      {"center_y_mm", c.phantom.star.center_y_mm}}}};
  doc["bucket_grid"] = {{"rows", c.bucket_grid.rows},
                        {"cols", c.bucket_grid.cols}};
  doc["recon"] = {{"method", c.recon.method},
                  {"iterations", c.recon.iterations},
                  {"step_size", c.recon.step_size},
                  {"regularizer", c.recon.regularizer},
                  {"regularizer_weight", c.recon.regularizer_weight},
                  {"nonnegativity", c.recon.nonnegativity},
                  {"deblock", c.recon.deblock},
                  {"notch_halfwidth", c.recon.notch_halfwidth},
                  {"deblock_in_loop", c.recon.deblock_in_loop}};
  doc["noise"] = {{"enabled", c.noise.enabled},
                  {"speckle_exposure_s", c.noise.speckle_exposure_s},
                  {"bucket_exposure_s", c.noise.bucket_exposure_s},
                  {"gamma_probability", c.noise.gamma_probability}};
  doc["seed"] = c.seed;
  return doc;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  return parse_experiment_config(json::parse(in));
}

void apply_override(json& doc, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("override must look like key.path=value: " +
                                assignment);
  std::string path = assignment.substr(0, eq);
  std::string value = assignment.substr(eq + 1);

  json* node = &doc;
  std::size_t begin = 0;
  while (true) {
    std::size_t dot = path.find('.', begin);
    std::string key = path.substr(begin, dot - begin);
    if (key.empty())
      throw std::invalid_argument("override has an empty path segment: " +
                                  assignment);
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    begin = dot + 1;
  }
}

ExperimentConfig experiment_preset(char which, double scale) {
  if (!(scale > 0.0) || scale > 1.0)
    throw std::invalid_argument("experiment preset: scale must be in (0, 1]");

  ExperimentConfig cfg;
  auto scaled_dim = [&](int px) {
    return std::max(8, static_cast<int>(std::lround(px * scale)));
  };

  switch (which) {
    case 'a':
      cfg.detector = {scaled_dim(100), scaled_dim(100), 25.7};
      cfg.bucket_grid = {1, 1};
      cfg.phantom.kind = "cd_stencil";
      cfg.phantom.holes = {{0.0, 0.0, 1.0 * scale}};
      cfg.recon.regularizer = "gradient_sparsity";
      break;
    case 'b':
      cfg.detector = {scaled_dim(256), scaled_dim(256), 51.4};
      cfg.bucket_grid = {std::max(1, scaled_dim(256) / 32),
                         std::max(1, scaled_dim(256) / 32)};
      cfg.phantom.kind = "cd_stencil";
      cfg.phantom.holes = {{-2.9 * scale, -2.9 * scale, 5.0 * scale},
                           {3.1 * scale, -2.3 * scale, 3.0 * scale},
                           {0.6 * scale, 3.4 * scale, 1.0 * scale}};
      cfg.recon.regularizer = "gradient_sparsity";
      break;
    case 'c':
    case 'd': {
      int dim = scaled_dim(256);
      int zoom = which == 'c' ? 16 : 8;
      cfg.detector = {dim, dim, 51.4};
      cfg.bucket_grid = {std::max(1, dim / zoom), std::max(1, dim / zoom)};
      cfg.phantom.kind = "resolution_star";
      cfg.phantom.star.diameter_mm = 20.0 * scale;
      // Star centred on the field-of-view corner: one quadrant visible.
      double half_fov_mm = dim * 51.4e-3 / 2.0;
      cfg.phantom.star.center_x_mm = -half_fov_mm;
      cfg.phantom.star.center_y_mm = -half_fov_mm;
      cfg.recon.regularizer = "smoothness";
      cfg.recon.deblock = true;
      break;
    }
    default:
      throw std::invalid_argument(
          "experiment preset: experiment must be one of a, b, c, d");
  }

  // Mask positions scale with the detector; the angular increment widens so
  // the schedule still covers a full revolution.
  cfg.schedule.count = std::max(16, static_cast<int>(std::lround(1716 * scale)));
  cfg.schedule.delta_theta_deg = 0.21 * 1716.0 / cfg.schedule.count;
  cfg.recon.method = "ixc";
  cfg.recon.iterations = 128;
  cfg.recon.regularizer_weight = 0.0;  // resolved by the caller (adaptive)
  return cfg;
}

TransmissionMap build_phantom(const ExperimentConfig& config) {
  if (config.phantom.kind == "cd_stencil")
    return make_cd_stencil(config.detector.width, config.detector.height,
                           config.detector.pitch_um, config.phantom.holes);
  if (config.phantom.kind == "resolution_star")
    return make_resolution_star(config.detector.width, config.detector.height,
                                config.detector.pitch_um, config.phantom.star);
  throw std::invalid_argument("unknown phantom kind " + config.phantom.kind);
}

ReconConfig build_recon_config(const ExperimentConfig::Recon& recon) {
  ReconConfig out;
  if (recon.method == "xc")
    out.method = ReconMethod::xc;
  else if (recon.method == "ixc")
    out.method = ReconMethod::ixc;
  else
    throw std::invalid_argument("unknown recon method " + recon.method);
  out.iterations = recon.iterations;
  out.step_size = recon.step_size;
  if (recon.regularizer == "none")
    out.regularizer = Regularizer::none;
  else if (recon.regularizer == "gradient_sparsity")
    out.regularizer = Regularizer::gradient_sparsity;
  else if (recon.regularizer == "smoothness")
    out.regularizer = Regularizer::smoothness;
  else
    throw std::invalid_argument("unknown regularizer " + recon.regularizer);
  out.regularizer_weight = recon.regularizer_weight;
  out.nonnegativity = recon.nonnegativity;
  out.deblock = recon.deblock;
  out.notch_halfwidth = recon.notch_halfwidth;
  out.deblock_in_loop = recon.deblock_in_loop;
  return out;
}

}  // namespace ngi
