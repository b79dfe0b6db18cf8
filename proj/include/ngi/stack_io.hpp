#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ngi/image.hpp"
#include "ngi/mask.hpp"
#include "ngi/measurement.hpp"

namespace ngi {

/// Stack file = <stem>.json manifest + <stem>.f32 payload of raw
/// little-endian 32-bit float frames, frame-major, row-major within a frame.
/// The payload is written first and the manifest last, so a readable manifest
/// marks a complete stack.
struct StackManifest {
  int format_version = 1;
  int width = 0;
  int height = 0;
  int count = 0;
  std::string dtype = "f32le";
  double pitch_um = 0.0;
  std::vector<double> angles_deg;
  double exposure_s = 0.0;
  std::uint64_t seed = 0;
  std::string kind = "image";  // "speckle" | "image" | "bucket"
};

struct StackFile {
  StackManifest manifest;
  std::vector<Image2D> frames;
};

/// `stem` may be given with or without the .json suffix.
void write_stack(const std::string& stem, const StackManifest& manifest,
                 const std::vector<Image2D>& frames);
StackFile read_stack(const std::string& stem_or_json);

void write_ensemble_stack(const std::string& stem,
                          const SpeckleEnsemble& ensemble, std::uint64_t seed);
SpeckleEnsemble read_ensemble_stack(const std::string& stem_or_json);

void write_image_stack(const std::string& stem, const Image2D& image);

/// Bucket CSV: header comment with grid metadata, then one row per mask
/// position: index, angle_deg, R*C values row-major.
void write_bucket_csv(const std::string& path, const BucketSeries& series);
BucketSeries read_bucket_csv(const std::string& path);

void write_bucket_stack(const std::string& stem, const BucketSeries& series);
BucketSeries read_bucket_stack(const std::string& stem_or_json);

/// Two-column CSV (x, y) with a header line.
void write_curve_csv(const std::string& path, const std::string& x_name,
                     const std::string& y_name, const std::vector<double>& x,
                     const std::vector<double>& y);

/// 16-bit binary PGM, values linearly mapped from [min, max] of the image.
void write_pgm16(const std::string& path, const Image2D& image);

}  // namespace ngi
