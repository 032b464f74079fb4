#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "thinstruct/thinstruct.h"

namespace fs = std::filesystem;

namespace {

struct Config {
  ts_config* c = nullptr;
  Config() { EXPECT_EQ(ts_config_create(&c), TS_OK); }
  ~Config() { ts_config_destroy(c); }
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ts_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(CApi, Version) {
  ASSERT_NE(ts_version(), nullptr);
  EXPECT_GT(std::string(ts_version()).size(), 0u);
}

TEST(CApi, ConfigErrors) {
  Config cfg;
  EXPECT_EQ(ts_config_set_number(cfg.c, "sigma", 2.0), TS_OK);
  EXPECT_EQ(ts_config_set_number(cfg.c, "no_such_key", 1.0), TS_ERR_INPUT);
  EXPECT_NE(std::string(ts_last_error()).find("no_such_key"), std::string::npos);
  EXPECT_EQ(ts_config_set_number(cfg.c, "sigma", -1.0), TS_ERR_INPUT);
  EXPECT_EQ(ts_config_set_number(cfg.c, "max_outer", 2.5), TS_ERR_INPUT);
  EXPECT_EQ(ts_config_set_string(cfg.c, "curvature", "cubic"), TS_ERR_INPUT);
  EXPECT_EQ(ts_config_set_string(cfg.c, "curvature", "abs"), TS_OK);
  EXPECT_EQ(ts_config_merge_json(cfg.c, "{not json"), TS_ERR_INPUT);
  EXPECT_EQ(ts_config_merge_json(cfg.c, "{\"gamma\": 0.5}"), TS_OK);
  EXPECT_EQ(ts_config_load_file(cfg.c, "/nonexistent/config.json"), TS_ERR_INPUT);
  const std::string json = ts_config_json(cfg.c);
  EXPECT_NE(json.find("\"gamma\": 0.5"), std::string::npos);
  EXPECT_NE(json.find("\"sigma\": 2.0"), std::string::npos);
  EXPECT_EQ(ts_config_set_number(nullptr, "sigma", 1.0), TS_ERR_INPUT);
}

TEST(CApi, DetectEdgesOnArray) {
  Config cfg;
  const int w = 12, h = 10;
  std::vector<double> px(w * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) px[y * w + x] = x < 6 ? 40.0 : 210.0;
  ts_result* r = nullptr;
  ASSERT_EQ(ts_detect_edges(cfg.c, px.data(), w, h, &r), TS_OK);
  EXPECT_EQ(ts_result_site_count(r), static_cast<std::size_t>(w * h));
  EXPECT_EQ(ts_result_dim(r), 2);
  double p[3], d[3], q = -1;
  ASSERT_EQ(ts_result_tangent(r, 5 * w + 5, p, d, &q), TS_OK);
  EXPECT_GE(q, 0.5);
  EXPECT_NEAR(std::hypot(d[0], d[1]), 1.0, 1e-12);
  EXPECT_EQ(ts_result_tangent(r, w * h, p, d, &q), TS_ERR_INPUT);
  const std::string report = ts_result_report(r);
  EXPECT_NE(report.find("trace"), std::string::npos);
  ts_result_destroy(r);

  EXPECT_EQ(ts_detect_edges(cfg.c, px.data(), 2, 2, &r), TS_ERR_INPUT);
  EXPECT_EQ(ts_detect_edges_file(cfg.c, "/nonexistent.pgm", &r), TS_ERR_INPUT);
}

TEST(CApi, FitPointsAndEval) {
  Config cfg;
  std::vector<double> xy;
  for (int k = 0; k < 32; ++k) {
    const double t = 2 * 3.14159265358979 * k / 32;
    xy.push_back(10 * std::cos(t));
    xy.push_back(10 * std::sin(t));
  }
  ts_result* r = nullptr;
  ASSERT_EQ(ts_fit_points(cfg.c, xy.data(), 32, 2, &r), TS_OK);
  EXPECT_EQ(ts_result_site_count(r), 32u);
  ts_result_destroy(r);
  EXPECT_EQ(ts_fit_points(cfg.c, xy.data(), 32, 4, &r), TS_ERR_INPUT);

  std::vector<double> pred(16, 0.0);
  std::vector<unsigned char> truth(16, 0);
  pred[5] = 1.0;
  truth[5] = 1;
  ts_eval* e = nullptr;
  ASSERT_EQ(ts_eval_arrays(pred.data(), truth.data(), 4, 4, 2.0, 64, &e), TS_OK);
  EXPECT_EQ(ts_eval_count(e), 64u);
  double t, prec, rec, f;
  ASSERT_EQ(ts_eval_point(e, ts_eval_best(e), &t, &prec, &rec, &f), TS_OK);
  EXPECT_DOUBLE_EQ(f, 1.0);
  ts_eval_destroy(e);
}

TEST(CApi, SynthErrors) {
  const auto dir = scratch("synth");
  EXPECT_EQ(ts_synth("dodecahedron", nullptr, dir.c_str(), "x"), TS_ERR_INPUT);
  EXPECT_EQ(ts_synth("circle", "{\"radius\": 5, \"samples\": 16}", dir.c_str(), "c"), TS_OK);
  EXPECT_TRUE(fs::exists(dir / "c.json"));
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  const std::string d = dir.string();
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("edges2d " + d + "/missing.pgm --out-dir " + d + "/run"), 2);
  EXPECT_EQ(run_cli("synth dodecahedron --out-dir " + d), 2);
  EXPECT_EQ(run_cli("edges2d --no-such-flag"), 2);

  ASSERT_EQ(run_cli("synth disk --out-dir " + d + " --stem disk --width 24 --height 24 --cx 12 --cy 12 --radius 7"), 0);
  ASSERT_EQ(run_cli("edges2d " + d + "/disk.pgm --out-dir " + d + "/run1 --gamma 0.25 --sigma 1 --curvature squared"),
            0);
  EXPECT_TRUE(fs::exists(dir / "run1" / "tangents.csv"));
  EXPECT_TRUE(fs::exists(dir / "run1" / "mask.pgm"));
  EXPECT_TRUE(fs::exists(dir / "run1" / "report.json"));

  // wrong-size truth for eval
  ASSERT_EQ(run_cli("synth disk --out-dir " + d + " --stem small --width 10 --height 10 --cx 5 --cy 5 --radius 3"), 0);
  EXPECT_EQ(run_cli("eval " + d + "/run1/mask.pgm " + d + "/small_truth.pgm"), 2);
  fs::remove_all(dir);
}

TEST(Cli, SeedReproducesFiles) {
  const auto dir = scratch("seed");
  const std::string d = dir.string();
  ASSERT_EQ(run_cli("synth circle --radius 20 --samples 64 --noise 0.5 --seed 7 --out-dir " + d + " --stem a"), 0);
  ASSERT_EQ(run_cli("synth circle --radius 20 --samples 64 --noise 0.5 --seed 7 --out-dir " + d + " --stem b"), 0);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  fs::remove_all(dir);
}
