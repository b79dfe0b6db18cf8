// End-to-end checks of the command-line surface: exit codes, file outputs,
// determinism. The binary path comes from the build system.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ngi/rng.hpp"
#include "ngi/stack_io.hpp"

namespace fs = std::filesystem;

#ifndef NGI_CLI_PATH
#error "NGI_CLI_PATH must be defined by the build"
#endif

namespace {

struct CliDir {
  fs::path path;
  CliDir() {
    path = fs::temp_directory_path() /
           ("ngi_cli_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~CliDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const {
    return (path / name).string();
  }
};

int run_cli(const std::string& args) {
  std::string cmd = std::string(NGI_CLI_PATH) + " " + args +
                    " >/dev/null 2>/dev/null";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string run_cli_capture(const std::string& args, const fs::path& dir) {
  std::string log = (dir / "stdout.txt").string();
  std::string cmd =
      std::string(NGI_CLI_PATH) + " " + args + " >" + log + " 2>/dev/null";
  if (std::system(cmd.c_str()) == -1) return {};
  std::ifstream in(log);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// Tiny, fast configuration: 16x16 detector, sparse mask, no noise.
void write_small_config(const std::string& path, int count,
                        const std::string& extra = "") {
  std::ofstream out(path);
  out << R"({
    "mask": {"packing_fraction": 0.05, "axial_length_mm": 10.0},
    "detector": {"width": 16, "height": 16, "pitch_um": 200.0},
    "schedule": {"count": )"
      << count << R"(, "delta_theta_deg": 10.0},
    "phantom": {"kind": "cd_stencil",
                "holes": [{"center_x_mm": 0.0, "center_y_mm": 0.0,
                           "diameter_mm": 1.2}]},
    "bucket_grid": {"rows": 4, "cols": 4},
    "noise": {"enabled": false},
    "seed": 5)"
      << extra << "\n}\n";
}

}  // namespace

TEST_CASE("simulate writes a stack with the advertised payload size") {
  CliDir dir;
  write_small_config(dir / "cfg.json", 1);
  int code = run_cli("simulate --config " + (dir / "cfg.json") + " --out " +
                     (dir / "out"));
  CHECK(code == 0);
  // One 16x16 float frame = 1024 bytes.
  CHECK(fs::file_size(dir / "out/speckle.f32") == 1024);
  auto stack = ngi::read_stack(dir / "out/speckle");
  CHECK(stack.manifest.kind == "speckle");
  CHECK(stack.manifest.count == 1);
}

TEST_CASE("simulate is deterministic for a fixed config and seed") {
  CliDir dir;
  write_small_config(dir / "cfg.json", 3);
  REQUIRE(run_cli("simulate --config " + (dir / "cfg.json") + " --out " +
                  (dir / "a")) == 0);
  REQUIRE(run_cli("simulate --config " + (dir / "cfg.json") + " --out " +
                  (dir / "b")) == 0);
  CHECK(slurp(dir / "a/speckle.f32") == slurp(dir / "b/speckle.f32"));
}

TEST_CASE("invalid configs exit with code 1") {
  CliDir dir;
  std::ofstream(dir / "bad.json") << "{\"detector\": {\"width\": -3}}";
  CHECK(run_cli("simulate --config " + (dir / "bad.json") + " --out " +
                (dir / "out")) == 1);
  std::ofstream(dir / "unknown.json") << "{\"surprise\": 1}";
  CHECK(run_cli("simulate --config " + (dir / "unknown.json") + " --out " +
                (dir / "out")) == 1);
  CHECK(run_cli("simulate --config " + (dir / "missing.json") + " --out " +
                (dir / "out")) == 1);
}

TEST_CASE("measure emits a bucket CSV whose columns follow the grid") {
  CliDir dir;
  write_small_config(dir / "cfg.json", 2);
  REQUIRE(run_cli("simulate --config " + (dir / "cfg.json") + " --out " +
                  (dir / "out")) == 0);
  REQUIRE(run_cli("measure --config " + (dir / "cfg.json") + " --ensemble " +
                  (dir / "out/speckle") + " --out " + (dir / "out")) == 0);

  auto series = ngi::read_bucket_csv(dir / "out/buckets.csv");
  CHECK(series.rows == 4);
  CHECK(series.cols == 4);
  CHECK(series.count() == 2);

  // Consistency oracle: bucket totals equal sum(I * T) from the stacks.
  auto speckle = ngi::read_stack(dir / "out/speckle");
  auto phantom = ngi::read_stack(dir / "out/phantom");
  for (std::size_t j = 0; j < 2; ++j) {
    double expected = 0.0;
    for (std::size_t i = 0; i < speckle.frames[j].values.size(); ++i)
      expected += speckle.frames[j].values[i] * phantom.frames[0].values[i];
    double total = 0.0;
    for (int k = 0; k < 16; ++k) total += series.values[j * 16 + k];
    CHECK(total == doctest::Approx(expected).epsilon(1e-5));
  }

  SUBCASE("a 1x1 grid gives a single value column") {
    REQUIRE(run_cli("measure --config " + (dir / "cfg.json") +
                    " --set bucket_grid.rows=1 --set bucket_grid.cols=1" +
                    " --ensemble " + (dir / "out/speckle") + " --out " +
                    (dir / "one")) == 0);
    std::ifstream in(dir / "one/buckets.csv");
    std::string meta, header;
    std::getline(in, meta);
    std::getline(in, header);
    CHECK(header == "index,angle_deg,v0_0");
  }
}

TEST_CASE("reconstruct handles xc, ixc and error exits") {
  CliDir dir;
  write_small_config(dir / "cfg.json", 24);
  REQUIRE(run_cli("simulate --config " + (dir / "cfg.json") + " --out " +
                  (dir / "out")) == 0);
  REQUIRE(run_cli("measure --config " + (dir / "cfg.json") + " --ensemble " +
                  (dir / "out/speckle") + " --out " + (dir / "out")) == 0);

  SUBCASE("xc on constant buckets writes a zero image") {
    // Craft a constant 1x1 bucket series by hand.
    {
      std::ofstream csv(dir / "const.csv");
      csv << "# bucket_grid rows=1 cols=1 pitch_mm=3.2 exposure_s=1\n";
      csv << "index,angle_deg,v0_0\n";
      for (int j = 0; j < 24; ++j) csv << j << "," << j * 10.0 << ",7.25\n";
    }
    REQUIRE(run_cli("reconstruct --ensemble " + (dir / "out/speckle") +
                    " --buckets " + (dir / "const.csv") + " --method xc" +
                    " --out " + (dir / "rec")) == 0);
    auto recon = ngi::read_stack(dir / "rec/recon");
    for (double v : recon.frames[0].values) CHECK(v == 0.0);
  }

  SUBCASE("ixc writes one residual row per iteration") {
    REQUIRE(run_cli("reconstruct --ensemble " + (dir / "out/speckle") +
                    " --buckets " + (dir / "out/buckets.csv") +
                    " --method ixc --iterations 16 --out " + (dir / "rec")) ==
            0);
    std::ifstream in(dir / "rec/recon_residuals.csv");
    std::string line;
    int rows = -1;  // header
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 16);
    std::string report = slurp(dir / "rec/recon_report.txt");
    CHECK(report.find("method=superres-ixc") != std::string::npos);
    CHECK(report.find("iterations=16") != std::string::npos);
    CHECK(report.find("wall_time_s=") != std::string::npos);
  }

  SUBCASE("mismatched bucket count exits nonzero") {
    {
      std::ofstream csv(dir / "short.csv");
      csv << "# bucket_grid rows=1 cols=1 pitch_mm=3.2 exposure_s=1\n";
      csv << "index,angle_deg,v0_0\n0,0,1\n1,10,2\n";
    }
    CHECK(run_cli("reconstruct --ensemble " + (dir / "out/speckle") +
                  " --buckets " + (dir / "short.csv") + " --out " +
                  (dir / "rec")) == 1);
  }

  SUBCASE("numerical divergence exits with code 2") {
    CHECK(run_cli("reconstruct --ensemble " + (dir / "out/speckle") +
                  " --buckets " + (dir / "out/buckets.csv") +
                  " --method ixc --iterations 32 --step 1000 --out " +
                  (dir / "rec")) == 2);
  }
}

TEST_CASE("analyze prints key=value metrics") {
  CliDir dir;

  SUBCASE("snr formula") {
    std::string out = run_cli_capture(
        "analyze snr --kappa 0.31 --count 1716 --n-sample 1716", dir.path);
    CHECK(out.find("snr_high_brilliance=0.31") != std::string::npos);
  }

  SUBCASE("contrast of a constant stack is zero") {
    std::vector<ngi::Image2D> frames{ngi::Image2D(8, 8, 100.0, 0.4)};
    ngi::StackManifest m;
    m.width = 8;
    m.height = 8;
    m.pitch_um = 100.0;
    m.exposure_s = 1.0;
    m.kind = "speckle";
    ngi::write_stack(dir / "flat", m, frames);
    std::string out =
        run_cli_capture("analyze contrast --ensemble " + (dir / "flat"),
                        dir.path);
    CHECK(out.find("kappa=0") != std::string::npos);
  }

  SUBCASE("frc of identical stacks never crosses") {
    ngi::Rng rng(3);
    ngi::Image2D img(16, 16, 50.0);
    for (double& v : img.values) v = rng.next_double();
    ngi::write_image_stack(dir / "img", img);
    std::string out = run_cli_capture(
        "analyze frc --stack " + (dir / "img") + " --stack2 " + (dir / "img"),
        dir.path);
    CHECK(out.find("frc_resolution_per_um=none") != std::string::npos);
  }
}

TEST_CASE("reproduce completes at a reduced scale") {
  CliDir dir;
  int code = run_cli("reproduce --experiment a --scale 0.25 --out " +
                     (dir / "a") + " --seed 3");
  CHECK(code == 0);
  for (const char* name :
       {"speckle.json", "buckets.csv", "recon_xc.f32", "recon_ixc.f32",
        "recon_ixc_reg.f32", "coarse.f32", "target.f32", "summary.txt",
        "config.json"})
    CHECK(fs::exists(dir / ("a/" + std::string(name))));
  std::string summary = slurp(dir / "a/summary.txt");
  CHECK(summary.find("ncc_xc=") != std::string::npos);
  CHECK(summary.find("kappa=") != std::string::npos);
}
