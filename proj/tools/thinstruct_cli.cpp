// Command-line front end over the C API.

#include <cstdio>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "thinstruct/thinstruct.h"

namespace {

using Json = nlohmann::json;

struct Common {
  std::string config_file;
  std::string out_dir = ".";
  std::optional<int> threads;
  bool verbose = false;
};

// Flag values that override the configuration file when given. CLI11 keeps
// pointers into these, so they must not relocate.
struct Overrides {
  std::deque<std::pair<std::string, std::optional<double>>> numbers;
  std::deque<std::pair<std::string, std::optional<std::string>>> strings;
  std::deque<std::pair<std::string, bool>> flags;
};

struct ConfigGuard {
  ts_config* cfg = nullptr;
  ~ConfigGuard() { ts_config_destroy(cfg); }
};
struct ResultGuard {
  ts_result* r = nullptr;
  ~ResultGuard() { ts_result_destroy(r); }
};
struct EvalGuard {
  ts_eval* e = nullptr;
  ~EvalGuard() { ts_eval_destroy(e); }
};

int report_error(ts_status s) {
  std::fprintf(stderr, "error: %s\n", ts_last_error());
  return static_cast<int>(s);
}

#define TS_CHECK(expr)                            \
  do {                                            \
    const ts_status s_ = (expr);                  \
    if (s_ != TS_OK) return report_error(s_);     \
  } while (0)

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_file, "JSON configuration file; explicit flags override it");
  app->add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
  app->add_option("--threads", c.threads, "Worker thread cap");
  app->add_flag("-v,--verbose", c.verbose, "Print a run summary");
}

void add_number(CLI::App* app, Overrides& o, const std::string& flag, const std::string& key, const std::string& help) {
  o.numbers.emplace_back(key, std::nullopt);
  app->add_option(flag, o.numbers.back().second, help);
}

void add_string(CLI::App* app, Overrides& o, const std::string& flag, const std::string& key, const std::string& help) {
  o.strings.emplace_back(key, std::nullopt);
  app->add_option(flag, o.strings.back().second, help);
}

int build_config(const Common& c, const Overrides& o, ConfigGuard& g) {
  TS_CHECK(ts_config_create(&g.cfg));
  if (!c.config_file.empty()) TS_CHECK(ts_config_load_file(g.cfg, c.config_file.c_str()));
  for (const auto& [key, v] : o.numbers)
    if (v) TS_CHECK(ts_config_set_number(g.cfg, key.c_str(), *v));
  for (const auto& [key, v] : o.strings)
    if (v) TS_CHECK(ts_config_set_string(g.cfg, key.c_str(), v->c_str()));
  for (const auto& [key, v] : o.flags)
    if (v) TS_CHECK(ts_config_set_bool(g.cfg, key.c_str(), 1));
  if (c.threads) TS_CHECK(ts_config_set_number(g.cfg, "threads", *c.threads));
  return 0;
}

std::string out_path(const Common& c, const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(c.out_dir, ec);
  return (std::filesystem::path(c.out_dir) / name).string();
}

void print_summary(const ts_result* r) {
  const Json rep = Json::parse(ts_result_report(r));
  std::fprintf(stderr, "sites: %zu\n", ts_result_site_count(r));
  if (rep.contains("inference")) {
    const auto& inf = rep["inference"];
    std::fprintf(stderr, "outer iterations: %d, converged: %s\n", inf["outer_iterations"].get<int>(),
                 inf["converged"].get<bool>() ? "yes" : "no");
    std::fprintf(stderr, "q >= 1/2: %zu, q >= 1/4: %zu\n", inf["sites_q_ge_half"].get<std::size_t>(),
                 inf["sites_q_ge_quarter"].get<std::size_t>());
  }
  if (rep.contains("fit"))
    std::fprintf(stderr, "objective: %.6g -> %.6g (%s)\n", rep["fit"]["initial_objective"].get<double>(),
                 rep["fit"]["final_objective"].get<double>(), rep["fit"]["termination"].get<std::string>().c_str());
  if (rep.contains("warning")) std::fprintf(stderr, "warning: %s\n", rep["warning"].get<std::string>().c_str());
  std::fprintf(stderr, "time: %.3f s\n", rep["timings"]["total_seconds"].get<double>());
}

int write_outputs(const Common& c, const ts_result* r, bool tangents, const char* mask_name) {
  if (tangents) TS_CHECK(ts_result_write_tangents(r, out_path(c, "tangents.csv").c_str()));
  if (mask_name) TS_CHECK(ts_result_write_mask(r, out_path(c, mask_name).c_str()));
  TS_CHECK(ts_result_write_report(r, out_path(c, "report.json").c_str()));
  if (c.verbose) print_summary(r);
  return 0;
}

void add_energy_flags(CLI::App* app, Overrides& o) {
  add_number(app, o, "--sigma", "sigma", "Soft-constraint scale (pixels)");
  add_string(app, o, "--curvature", "curvature", "squared | abs");
  add_number(app, o, "--epsilon", "epsilon", "Absolute-curvature reweighting constant");
  add_number(app, o, "--max-outer", "max_outer", "Outer iterations cap");
  add_number(app, o, "--lm-iterations", "lm_max_iterations", "Trust-region iterations per tangent step");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thin-structure detection and delineation with curvature regularization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ts_version()));

  // edges2d
  Common ec;
  Overrides eo;
  std::string edges_in;
  auto* edges = app.add_subcommand("edges2d", "Sub-pixel edge detection on a PGM image");
  edges->add_option("input", edges_in, "Grayscale PGM (P2/P5)")->required();
  add_common(edges, ec);
  add_energy_flags(edges, eo);
  add_number(edges, eo, "--gamma", "gamma", "Reward for every active neighbor pair");
  add_number(edges, eo, "--tau", "tau", "Dead band of the truncated distance (pixels)");
  add_number(edges, eo, "--scale", "scale", "Sub-pixel mask upscaling factor");
  add_number(edges, eo, "--q-min", "q_min", "Minimum marginal written to the mask");
  add_string(edges, eo, "--normalize", "normalize", "Gradient normalization: std | variance");
  add_string(edges, eo, "--init", "init", "Tangent initialization: perpendicular | paper-literal");
  add_string(edges, eo, "--distance", "distance", "truncated | euclidean");

  // vessels3d
  Common vc;
  Overrides vo;
  std::string vessels_in;
  auto* vessels = app.add_subcommand("vessels3d", "Vessel center-lines from a vesselness field");
  vessels->add_option("input", vessels_in, "Vesselness field (.vfield)")->required();
  add_common(vessels, vc);
  add_energy_flags(vessels, vo);
  add_number(vessels, vo, "--beta", "beta", "Direction prior weight");
  add_number(vessels, vo, "--k", "k", "Multiplier of the per-voxel scale");
  add_number(vessels, vo, "--keep", "keep", "Fraction of voxels kept by vesselness");
  add_number(vessels, vo, "--alignment-power", "alignment_power", "Exponent of the misalignment term (1 or 2)");

  // fit-points
  Common pc;
  Overrides po;
  std::string points_in;
  auto* points = app.add_subcommand("fit-points", "Curve tangents for a point cloud");
  points->add_option("input", points_in, "CSV with x,y[,z] rows")->required();
  add_common(points, pc);
  add_energy_flags(points, po);
  add_number(points, po, "--knn", "knn", "Neighbors per point");

  // fit-ridges
  Common rc;
  Overrides ro;
  std::string ridges_in;
  auto* ridges = app.add_subcommand("fit-ridges", "Tangents on hysteresis ridges of a vesselness field");
  ridges->add_option("input", ridges_in, "Vesselness field (.vfield)")->required();
  add_common(ridges, rc);
  add_energy_flags(ridges, ro);
  add_number(ridges, ro, "--low", "low", "Hysteresis low threshold");
  add_number(ridges, ro, "--high", "high", "Hysteresis high threshold");
  add_number(ridges, ro, "--beta", "beta", "Direction prior weight");
  add_number(ridges, ro, "--k", "k", "Multiplier of the per-voxel scale");

  // synth
  std::string synth_shape, synth_stem, synth_dir = ".";
  Json synth_params = Json::object();
  std::vector<std::pair<std::string, std::optional<double>>> synth_numbers;
  std::optional<std::string> tube_shape;
  std::optional<unsigned long long> seed;
  auto* synth = app.add_subcommand("synth", "Write a synthetic instance with ground truth");
  synth->add_option("shape", synth_shape,
                    "circle | line | square | rounded-square | disk | polygon | step-edge | gap-image | tube3d")
      ->required();
  synth->add_option("--out-dir", synth_dir, "Output directory")->capture_default_str();
  synth->add_option("--stem", synth_stem, "File name stem (default: the shape name)");
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--tube", tube_shape, "tube3d center-line: helix | straight | y");
  const std::vector<std::string> synth_keys{"radius", "samples", "noise", "length", "gap", "side", "per_side",
                                            "corner", "width", "height", "cx", "cy", "offset", "sides",
                                            "rotation", "background", "foreground", "size", "direction_noise"};
  synth_numbers.reserve(synth_keys.size());
  for (const auto& k : synth_keys) {
    synth_numbers.emplace_back(k, std::nullopt);
    std::string flag = "--" + k;
    std::replace(flag.begin(), flag.end(), '_', '-');
    synth->add_option(flag, synth_numbers.back().second, k);
  }

  // eval
  std::string pred_in, truth_in, eval_dir;
  double rho = 2.0;
  int steps = 64;
  auto* eval = app.add_subcommand("eval", "Precision/recall/F-measure of a probability mask");
  eval->add_option("predicted", pred_in, "Predicted probability PGM")->required();
  eval->add_option("truth", truth_in, "Ground-truth PGM (nonzero = boundary)")->required();
  eval->add_option("--rho", rho, "Matching tolerance in pixels")->capture_default_str();
  eval->add_option("--steps", steps, "Number of thresholds in [0, 1]")->capture_default_str();
  eval->add_option("--out-dir", eval_dir, "Directory for pr_curve.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return TS_ERR_INPUT;
  }

  auto run_pipeline = [](const Common& c, const Overrides& o,
                         const std::function<ts_status(const ts_config*, ts_result**)>& run, bool tangents,
                         const char* mask) -> int {
    ConfigGuard g;
    if (int rc = build_config(c, o, g)) return rc;
    ResultGuard r;
    TS_CHECK(run(g.cfg, &r.r));
    return write_outputs(c, r.r, tangents, mask);
  };

  if (edges->parsed())
    return run_pipeline(
        ec, eo, [&](const ts_config* c, ts_result** r) { return ts_detect_edges_file(c, edges_in.c_str(), r); }, true,
        "mask.pgm");
  if (vessels->parsed())
    return run_pipeline(
        vc, vo, [&](const ts_config* c, ts_result** r) { return ts_detect_vessels_file(c, vessels_in.c_str(), r); },
        true, nullptr);
  if (points->parsed())
    return run_pipeline(
        pc, po, [&](const ts_config* c, ts_result** r) { return ts_fit_points_file(c, points_in.c_str(), r); }, true,
        nullptr);
  if (ridges->parsed())
    return run_pipeline(
        rc, ro, [&](const ts_config* c, ts_result** r) { return ts_fit_ridges_file(c, ridges_in.c_str(), r); }, true,
        "ridge_mask.pgm");

  if (synth->parsed()) {
    for (const auto& [k, v] : synth_numbers)
      if (v) synth_params[k] = *v;
    for (const char* k : {"samples", "width", "height", "sides", "size", "length", "gap", "per_side"})
      if (synth_params.contains(k)) synth_params[k] = static_cast<long long>(synth_params[k].get<double>());
    if (seed) synth_params["seed"] = *seed;
    if (tube_shape) synth_params["shape"] = *tube_shape;
    const std::string stem = synth_stem.empty() ? synth_shape : synth_stem;
    TS_CHECK(ts_synth(synth_shape.c_str(), synth_params.dump().c_str(), synth_dir.c_str(), stem.c_str()));
    std::printf("%s\n", (std::filesystem::path(synth_dir) / (stem + ".json")).string().c_str());
    return 0;
  }

  if (eval->parsed()) {
    EvalGuard e;
    TS_CHECK(ts_eval_files(pred_in.c_str(), truth_in.c_str(), rho, steps, &e.e));
    double t = 0, p = 0, r = 0, f = 0;
    TS_CHECK(ts_eval_point(e.e, ts_eval_best(e.e), &t, &p, &r, &f));
    std::printf("best_f=%.6f precision=%.6f recall=%.6f threshold=%.6f\n", f, p, r, t);
    if (!eval_dir.empty()) {
      std::error_code errc;
      std::filesystem::create_directories(eval_dir, errc);
      TS_CHECK(ts_eval_write_curve(e.e, (std::filesystem::path(eval_dir) / "pr_curve.csv").string().c_str()));
    }
    return 0;
  }
  return TS_ERR_INPUT;
}
