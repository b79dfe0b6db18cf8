#include "ngi/stack_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ngi {

using nlohmann::json;

namespace {

std::string strip_suffix(const std::string& path, const std::string& suffix) {
  if (path.size() > suffix.size() &&
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return path.substr(0, path.size() - suffix.size());
  return path;
}

void check_manifest(const StackManifest& m) {
  if (m.format_version != 1)
    throw std::invalid_argument("stack: unsupported format_version");
  if (m.width < 1 || m.height < 1 || m.count < 1)
    throw std::invalid_argument("stack: invalid dimensions");
  if (m.dtype != "f32le")
    throw std::invalid_argument("stack: unsupported dtype " + m.dtype);
  if (!(m.pitch_um > 0.0))
    throw std::invalid_argument("stack: pitch must be > 0");
  if (m.angles_deg.size() != static_cast<std::size_t>(m.count))
    throw std::invalid_argument("stack: angles_deg length != count");
  if (m.kind != "speckle" && m.kind != "image" && m.kind != "bucket")
    throw std::invalid_argument("stack: unknown kind " + m.kind);
}

}  // namespace

void write_stack(const std::string& stem, const StackManifest& manifest,
                 const std::vector<Image2D>& frames) {
  StackManifest m = manifest;
  m.count = static_cast<int>(frames.size());
  if (m.angles_deg.empty()) m.angles_deg.assign(frames.size(), 0.0);
  check_manifest(m);
  for (const Image2D& f : frames)
    if (f.width != m.width || f.height != m.height)
      throw std::invalid_argument("stack: frame dims differ from manifest");

  std::string base = strip_suffix(stem, ".json");

  // Payload first; the manifest acts as the commit marker.
  {
    std::ofstream payload(base + ".f32", std::ios::binary | std::ios::trunc);
    if (!payload) throw std::runtime_error("stack: cannot write " + base +
                                           ".f32");
    std::vector<float> row(m.width);
    for (const Image2D& f : frames) {
      for (int r = 0; r < m.height; ++r) {
        const double* src = &f.values[static_cast<std::size_t>(r) * m.width];
        for (int c = 0; c < m.width; ++c) row[c] = static_cast<float>(src[c]);
        payload.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(sizeof(float) * row.size()));
      }
    }
    if (!payload) throw std::runtime_error("stack: short write on payload");
  }

  json doc;
  doc["format_version"] = m.format_version;
  doc["width"] = m.width;
  doc["height"] = m.height;
  doc["count"] = m.count;
  doc["dtype"] = m.dtype;
  doc["pitch_um"] = m.pitch_um;
  doc["angles_deg"] = m.angles_deg;
  doc["exposure_s"] = m.exposure_s;
  doc["seed"] = m.seed;
  doc["kind"] = m.kind;
  std::ofstream manifest_out(base + ".json", std::ios::trunc);
  if (!manifest_out)
    throw std::runtime_error("stack: cannot write " + base + ".json");
  manifest_out << doc.dump(2) << "\n";
}

StackFile read_stack(const std::string& stem_or_json) {
  std::string base = strip_suffix(stem_or_json, ".json");

  std::ifstream manifest_in(base + ".json");
  if (!manifest_in)
    throw std::runtime_error("stack: cannot open " + base + ".json");
  json doc = json::parse(manifest_in);

  static const char* known[] = {"format_version", "width",      "height",
                                "count",          "dtype",      "pitch_um",
                                "angles_deg",     "exposure_s", "seed",
                                "kind"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) {
          return it.key() == k;
        }) == std::end(known))
      throw std::invalid_argument("stack: unknown manifest key " + it.key());
  }

  StackFile file;
  StackManifest& m = file.manifest;
  m.format_version = doc.at("format_version").get<int>();
  m.width = doc.at("width").get<int>();
  m.height = doc.at("height").get<int>();
  m.count = doc.at("count").get<int>();
  m.dtype = doc.at("dtype").get<std::string>();
  m.pitch_um = doc.at("pitch_um").get<double>();
  m.angles_deg = doc.at("angles_deg").get<std::vector<double>>();
  m.exposure_s = doc.at("exposure_s").get<double>();
  m.seed = doc.at("seed").get<std::uint64_t>();
  m.kind = doc.at("kind").get<std::string>();
  check_manifest(m);

  std::ifstream payload(base + ".f32", std::ios::binary | std::ios::ate);
  if (!payload)
    throw std::runtime_error("stack: cannot open " + base + ".f32");
  std::size_t expected = 4ULL * m.width * m.height * m.count;
  std::size_t actual = static_cast<std::size_t>(payload.tellg());
  if (actual != expected)
    throw std::invalid_argument(
        "stack: payload size " + std::to_string(actual) +
        " does not match manifest (expected " + std::to_string(expected) +
        ")");
  payload.seekg(0);

  file.frames.reserve(m.count);
  std::vector<float> row(m.width);
  for (int j = 0; j < m.count; ++j) {
    Image2D frame(m.width, m.height, m.pitch_um);
    for (int r = 0; r < m.height; ++r) {
      payload.read(reinterpret_cast<char*>(row.data()),
                   static_cast<std::streamsize>(sizeof(float) * row.size()));
      double* dst = &frame.values[static_cast<std::size_t>(r) * m.width];
      for (int c = 0; c < m.width; ++c) dst[c] = row[c];
    }
    file.frames.push_back(std::move(frame));
  }
  if (!payload) throw std::runtime_error("stack: short read on payload");
  return file;
}

void write_ensemble_stack(const std::string& stem,
                          const SpeckleEnsemble& ensemble,
                          std::uint64_t seed) {
  StackManifest m;
  m.width = ensemble.frame_width();
  m.height = ensemble.frame_height();
  m.pitch_um = ensemble.pitch_um();
  m.angles_deg = ensemble.angles_deg;
  m.exposure_s = ensemble.exposure_s;
  m.seed = seed;
  m.kind = "speckle";
  write_stack(stem, m, ensemble.frames);
}

SpeckleEnsemble read_ensemble_stack(const std::string& stem_or_json) {
  StackFile file = read_stack(stem_or_json);
  SpeckleEnsemble ensemble;
  ensemble.frames = std::move(file.frames);
  ensemble.angles_deg = file.manifest.angles_deg;
  ensemble.axial_offsets_mm.assign(ensemble.angles_deg.size(), 0.0);
  ensemble.exposure_s = file.manifest.exposure_s;
  return ensemble;
}

void write_image_stack(const std::string& stem, const Image2D& image) {
  StackManifest m;
  m.width = image.width;
  m.height = image.height;
  m.pitch_um = image.pitch_um;
  m.exposure_s = 0.0;
  m.kind = "image";
  write_stack(stem, m, {image});
}

void write_bucket_csv(const std::string& path, const BucketSeries& series) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("bucket csv: cannot write " + path);
  char line[128];
  std::snprintf(line, sizeof line,
                "# bucket_grid rows=%d cols=%d pitch_mm=%.9g exposure_s=%.9g\n",
                series.rows, series.cols, series.bucket_pitch_mm,
                series.exposure_s);
  out << line;
  out << "index,angle_deg";
  for (int r = 0; r < series.rows; ++r)
    for (int c = 0; c < series.cols; ++c)
      out << ",v" << r << "_" << c;
  out << "\n";
  const std::size_t per_entry =
      static_cast<std::size_t>(series.rows) * series.cols;
  for (std::size_t j = 0; j < series.count(); ++j) {
    out << j;
    std::snprintf(line, sizeof line, ",%.9g", series.angles_deg[j]);
    out << line;
    for (std::size_t k = 0; k < per_entry; ++k) {
      std::snprintf(line, sizeof line, ",%.17g",
                    series.values[j * per_entry + k]);
      out << line;
    }
    out << "\n";
  }
}

BucketSeries read_bucket_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("bucket csv: cannot open " + path);
  std::string header;
  std::getline(in, header);
  BucketSeries series;
  if (std::sscanf(header.c_str(),
                  "# bucket_grid rows=%d cols=%d pitch_mm=%lf exposure_s=%lf",
                  &series.rows, &series.cols, &series.bucket_pitch_mm,
                  &series.exposure_s) != 4)
    throw std::invalid_argument("bucket csv: missing grid metadata header");
  std::string columns;
  std::getline(in, columns);  // column names

  const std::size_t per_entry =
      static_cast<std::size_t>(series.rows) * series.cols;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> fields;
    while (std::getline(ss, cell, ',')) fields.push_back(std::stod(cell));
    if (fields.size() != per_entry + 2)
      throw std::invalid_argument("bucket csv: malformed row");
    series.angles_deg.push_back(fields[1]);
    series.values.insert(series.values.end(), fields.begin() + 2,
                         fields.end());
  }
  if (series.angles_deg.empty())
    throw std::invalid_argument("bucket csv: no data rows");
  return series;
}

void write_bucket_stack(const std::string& stem, const BucketSeries& series) {
  StackManifest m;
  m.width = series.cols;
  m.height = series.rows;
  m.pitch_um = series.bucket_pitch_mm * 1e3;
  m.angles_deg = series.angles_deg;
  m.exposure_s = series.exposure_s;
  m.kind = "bucket";
  const std::size_t per_entry =
      static_cast<std::size_t>(series.rows) * series.cols;
  std::vector<Image2D> frames;
  frames.reserve(series.count());
  for (std::size_t j = 0; j < series.count(); ++j) {
    Image2D frame(series.cols, series.rows, m.pitch_um);
    std::copy(series.values.begin() + j * per_entry,
              series.values.begin() + (j + 1) * per_entry,
              frame.values.begin());
    frames.push_back(std::move(frame));
  }
  write_stack(stem, m, frames);
}

BucketSeries read_bucket_stack(const std::string& stem_or_json) {
  StackFile file = read_stack(stem_or_json);
  if (file.manifest.kind != "bucket")
    throw std::invalid_argument("bucket stack: kind is not 'bucket'");
  BucketSeries series;
  series.rows = file.manifest.height;
  series.cols = file.manifest.width;
  series.bucket_pitch_mm = file.manifest.pitch_um * 1e-3;
  series.angles_deg = file.manifest.angles_deg;
  series.exposure_s = file.manifest.exposure_s;
  for (const Image2D& frame : file.frames)
    series.values.insert(series.values.end(), frame.values.begin(),
                         frame.values.end());
  return series;
}

void write_curve_csv(const std::string& path, const std::string& x_name,
                     const std::string& y_name, const std::vector<double>& x,
                     const std::vector<double>& y) {
  if (x.size() != y.size())
    throw std::invalid_argument("curve csv: length mismatch");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("curve csv: cannot write " + path);
  out << x_name << "," << y_name << "\n";
  char line[96];
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", x[i], y[i]);
    out << line;
  }
}

void write_pgm16(const std::string& path, const Image2D& image) {
  double lo = image.values[0], hi = image.values[0];
  for (double v : image.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("pgm: cannot write " + path);
  out << "P5\n" << image.width << " " << image.height << "\n65535\n";
  for (double v : image.values) {
    unsigned val = static_cast<unsigned>(std::lround((v - lo) * scale));
    // PGM 16-bit samples are big-endian.
    unsigned char bytes[2] = {static_cast<unsigned char>(val >> 8),
                              static_cast<unsigned char>(val & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 2);
  }
}

}  // namespace ngi
