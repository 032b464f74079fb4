#include "thinstruct/thinstruct.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "config.hpp"
#include "thinstruct/error.hpp"
#include "thinstruct/evaluation.hpp"
#include "thinstruct/io.hpp"
#include "thinstruct/parallel.hpp"
#include "thinstruct/pipelines.hpp"
#include "thinstruct/synth.hpp"

using thinstruct::config::Json;
namespace ts = thinstruct;

struct ts_config {
  Json values = ts::config::defaults();
  std::string text;
};

enum class ResultKind { edges, points, vessels, ridges };

struct ts_result {
  ResultKind kind = ResultKind::edges;
  ts::SiteSet sites;
  ts::Tangents L;
  std::vector<double> Q;
  ts::SubpixelMask mask;
  std::vector<std::uint8_t> ridge;
  int nx = 0, ny = 0, nz = 0;
  Json report;
  std::string report_text;
};

struct ts_eval {
  ts::EvalResult result;
};

namespace {

thread_local std::string g_last_error;

ts_status fail(ts_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class Fn>
ts_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return TS_OK;
  } catch (const ts::Error& e) {
    return fail(static_cast<ts_status>(static_cast<int>(e.code())), e.what());
  } catch (const Json::exception& e) {
    return fail(TS_ERR_INPUT, std::string("configuration: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(TS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TS_ERR_INTERNAL, e.what());
  }
}

void require(const void* p, const char* what) {
  if (!p) throw ts::InputError(std::string(what) + " must not be null");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Json trace_json(const std::vector<ts::TraceRecord>& trace) {
  Json out = Json::array();
  for (const auto& t : trace)
    out.push_back({{"outer", t.outer},
                   {"phase", t.phase},
                   {"expected_energy", t.expected_energy},
                   {"elbo", t.elbo},
                   {"max_delta", t.max_delta},
                   {"accepted_steps", t.accepted_steps}});
  return out;
}

Json state_json(const ts::InferenceState& st) {
  std::size_t half = 0, quarter = 0;
  for (double q : st.Q) {
    half += q >= 0.5;
    quarter += q >= 0.25;
  }
  return {{"trace", trace_json(st.trace)},
          {"outer_iterations", st.outer_iterations},
          {"mean_field_sweeps", st.mean_field_sweeps},
          {"lm_iterations", st.lm_iterations},
          {"accepted_steps", st.accepted_steps},
          {"converged", st.converged},
          {"max_descent_violation", st.max_descent_violation},
          {"sites_q_ge_half", half},
          {"sites_q_ge_quarter", quarter}};
}

Json lm_json(const ts::LmResult& lm) {
  Json stats = Json::array();
  for (const auto& s : lm.stats)
    stats.push_back({{"iter", s.iter},
                     {"objective", s.objective},
                     {"grad_norm", s.grad_norm},
                     {"lambda", s.lambda_lm},
                     {"rho", s.rho},
                     {"accepted", s.accepted},
                     {"cg_iters", s.cg_iters}});
  return {{"initial_objective", lm.initial_objective},
          {"final_objective", lm.final_objective},
          {"accepted_steps", lm.accepted_steps},
          {"termination", ts::to_string(lm.termination)},
          {"iterations", stats}};
}

void apply_run_settings(const Json& cfg) { ts::set_thread_count(cfg.at("threads").get<int>()); }

void finish_report(ts_result& r, const char* command, const Json& cfg, double elapsed) {
  r.report["command"] = command;
  r.report["config"] = cfg;
  r.report["sites"] = r.sites.size();
  r.report["timings"] = {{"total_seconds", elapsed}};
  r.report_text = r.report.dump(2);
}

ts_result* run_edges(const ts_config* cfg, const ts::GrayImage& image) {
  const auto t0 = std::chrono::steady_clock::now();
  apply_run_settings(cfg->values);
  const auto params = ts::config::edge_params(cfg->values);
  auto res = ts::detect_edges_2d(image, params);
  auto r = std::make_unique<ts_result>();
  r->kind = ResultKind::edges;
  r->sites = std::move(res.sites);
  r->L = std::move(res.state.L);
  r->report["inference"] = state_json(res.state);
  r->Q = std::move(res.state.Q);
  r->mask = std::move(res.mask);
  r->report["image"] = {{"width", image.width}, {"height", image.height}};
  r->report["gradient_divisor"] = res.gradients.divisor;
  r->report["mask"] = {{"scale", r->mask.scale},
                       {"width", r->mask.width},
                       {"height", r->mask.height},
                       {"dropped", r->mask.dropped}};
  finish_report(*r, "edges2d", cfg->values, seconds_since(t0));
  return r.release();
}

ts_result* run_points(const ts_config* cfg, const std::vector<ts::Vec3>& pts, int dim) {
  const auto t0 = std::chrono::steady_clock::now();
  apply_run_settings(cfg->values);
  const auto params = ts::config::point_cloud_params(cfg->values);
  auto res = ts::fit_point_cloud(pts, dim, params);
  auto r = std::make_unique<ts_result>();
  r->kind = ResultKind::points;
  r->sites = std::move(res.sites);
  r->L = std::move(res.fit.L);
  r->Q.assign(r->sites.size(), 1.0);
  r->report["fit"] = lm_json(res.fit);
  r->report["pairs"] = res.graph.pair_count();
  r->report["knn_weight_residual"] = res.graph.weight_residual;
  finish_report(*r, "fit-points", cfg->values, seconds_since(t0));
  return r.release();
}

// Applies overrides only if the resulting configuration is valid.
void assign(ts_config* cfg, const Json& overrides) {
  Json next = cfg->values;
  for (const auto& [key, value] : overrides.items()) {
    ts::config::validate_key(key, value);
    next[key] = value;
  }
  ts::config::check(ts::config::merged(next));
  cfg->values = std::move(next);
}

}  // namespace

extern "C" {

const char* ts_version(void) { return "0.1.0"; }

const char* ts_last_error(void) { return g_last_error.c_str(); }

void ts_set_threads(int n) { ts::set_thread_count(n); }

ts_status ts_config_create(ts_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new ts_config();
  });
}

void ts_config_destroy(ts_config* cfg) { delete cfg; }

ts_status ts_config_set_number(ts_config* cfg, const char* key, double value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    const Json d = ts::config::defaults();
    const auto it = d.find(key);
    Json v = value;
    if (it != d.end() && it->is_number_integer()) {
      if (value != std::floor(value) || std::abs(value) > 1e15)
        throw ts::InputError(std::string("configuration key ") + key + " must be an integer");
      v = static_cast<long long>(value);
    }
    assign(cfg, {{key, v}});
  });
}

ts_status ts_config_set_string(ts_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    assign(cfg, {{key, value}});
  });
}

ts_status ts_config_set_bool(ts_config* cfg, const char* key, int value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    assign(cfg, {{key, value != 0}});
  });
}

ts_status ts_config_merge_json(ts_config* cfg, const char* json) {
  return guarded([&] {
    require(cfg, "config");
    require(json, "json");
    Json j;
    try {
      j = Json::parse(json);
    } catch (const Json::parse_error& e) {
      throw ts::InputError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ts::InputError("configuration must be a JSON object");
    assign(cfg, j);
  });
}

ts_status ts_config_load_file(ts_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "config");
    require(path, "path");
    std::ifstream in(path);
    if (!in) throw ts::InputError(std::string("cannot open ") + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const ts_status s = ts_config_merge_json(cfg, text.c_str());
    if (s != TS_OK) throw ts::InputError(std::string(path) + ": " + g_last_error);
  });
}

const char* ts_config_json(ts_config* cfg) {
  if (!cfg) return "";
  cfg->text = ts::config::merged(cfg->values).dump(2);
  return cfg->text.c_str();
}

ts_status ts_detect_edges(const ts_config* cfg, const double* pixels, int width, int height, ts_result** out) {
  return guarded([&] {
    require(cfg, "config");
    require(pixels, "pixels");
    require(out, "out");
    if (width < 3 || height < 3) throw ts::InputError("image must be at least 3x3");
    ts::GrayImage img;
    img.width = width;
    img.height = height;
    img.pixels.assign(pixels, pixels + static_cast<std::size_t>(width) * height);
    *out = run_edges(cfg, img);
  });
}

ts_status ts_detect_edges_file(const ts_config* cfg, const char* pgm_path, ts_result** out) {
  return guarded([&] {
    require(cfg, "config");
    require(pgm_path, "path");
    require(out, "out");
    *out = run_edges(cfg, ts::io::read_image(pgm_path));
  });
}

ts_status ts_fit_points(const ts_config* cfg, const double* coords, size_t count, int dim, ts_result** out) {
  return guarded([&] {
    require(cfg, "config");
    require(coords, "coords");
    require(out, "out");
    if (dim != 2 && dim != 3) throw ts::InputError("point dimension must be 2 or 3");
    std::vector<ts::Vec3> pts(count, ts::Vec3::Zero());
    for (size_t k = 0; k < count; ++k)
      for (int c = 0; c < dim; ++c) pts[k][c] = coords[k * dim + c];
    *out = run_points(cfg, pts, dim);
  });
}

ts_status ts_fit_points_file(const ts_config* cfg, const char* csv_path, ts_result** out) {
  return guarded([&] {
    require(cfg, "config");
    require(csv_path, "path");
    require(out, "out");
    int dim = 2;
    const auto pts = ts::io::read_points_csv(csv_path, &dim);
    *out = run_points(cfg, pts, dim);
  });
}

ts_status ts_detect_vessels_file(const ts_config* cfg, const char* vfield_path, ts_result** out) {
  return guarded([&] {
    require(cfg, "config");
    require(vfield_path, "path");
    require(out, "out");
    const auto t0 = std::chrono::steady_clock::now();
    apply_run_settings(cfg->values);
    const auto params = ts::config::vessel_params(cfg->values);
    const auto field = ts::io::read_vfield(vfield_path);
    auto res = ts::detect_vessels_3d(field, params);
    auto r = std::make_unique<ts_result>();
    r->kind = ResultKind::vessels;
    r->nx = field.nx;
    r->ny = field.ny;
    r->nz = field.nz;
    r->sites = std::move(res.sites);
    r->L = std::move(res.state.L);
    r->report["inference"] = state_json(res.state);
    r->Q = std::move(res.state.Q);
    r->report["volume"] = {field.nx, field.ny, field.nz};
    r->report["pairs"] = res.grid.graph.pair_count();
    finish_report(*r, "vessels3d", cfg->values, seconds_since(t0));
    *out = r.release();
  });
}

ts_status ts_fit_ridges_file(const ts_config* cfg, const char* vfield_path, ts_result** out) {
  return guarded([&] {
    require(cfg, "config");
    require(vfield_path, "path");
    require(out, "out");
    const auto t0 = std::chrono::steady_clock::now();
    apply_run_settings(cfg->values);
    const auto params = ts::config::vessel_params(cfg->values);
    const auto field = ts::io::read_vfield(vfield_path);
    const double low = cfg->values.at("low").get<double>(), high = cfg->values.at("high").get<double>();
    auto res = ts::fit_tangents_fixed_q(field, low, high, params);
    auto r = std::make_unique<ts_result>();
    r->kind = ResultKind::ridges;
    r->nx = field.nx;
    r->ny = field.ny;
    r->nz = field.nz;
    r->ridge = std::move(res.ridge);
    r->sites = std::move(res.sites);
    r->sites.dim = 3;
    r->L = std::move(res.fit.L);
    r->Q.assign(r->sites.size(), 1.0);
    if (r->sites.size() == 0) r->report["warning"] = "no voxel reaches the high threshold; result is empty";
    else r->report["fit"] = lm_json(res.fit);
    r->report["volume"] = {field.nx, field.ny, field.nz};
    finish_report(*r, "fit-ridges", cfg->values, seconds_since(t0));
    *out = r.release();
  });
}

void ts_result_destroy(ts_result* r) { delete r; }

size_t ts_result_site_count(const ts_result* r) { return r ? r->sites.size() : 0; }

int ts_result_dim(const ts_result* r) { return r ? r->sites.dim : 0; }

ts_status ts_result_tangent(const ts_result* r, size_t i, double point[3], double direction[3], double* q) {
  return guarded([&] {
    require(r, "result");
    if (i >= r->sites.size()) throw ts::InputError("site index out of range");
    const ts::Vec3 p = ts::project_onto_line(r->L[i], r->sites.positions[i]);
    for (int c = 0; c < 3; ++c) {
      if (point) point[c] = p[c];
      if (direction) direction[c] = r->L[i].direction[c];
    }
    if (q) *q = r->Q[i];
  });
}

ts_status ts_result_write_tangents(const ts_result* r, const char* path) {
  return guarded([&] {
    require(r, "result");
    require(path, "path");
    if (r->sites.dim == 3) ts::io::write_tangents_csv_3d(path, r->sites, r->L, r->Q);
    else ts::io::write_tangents_csv_2d(path, r->sites, r->L, r->Q);
  });
}

ts_status ts_result_write_mask(const ts_result* r, const char* path) {
  return guarded([&] {
    require(r, "result");
    require(path, "path");
    if (r->kind == ResultKind::edges) {
      ts::io::write_probability_mask(path, r->mask.values, r->mask.width, r->mask.height);
    } else if (r->kind == ResultKind::ridges) {
      ts::io::write_binary_mask(path, r->ridge, r->nx, r->ny * r->nz);
    } else {
      throw ts::InputError("this result has no mask");
    }
  });
}

ts_status ts_result_write_report(const ts_result* r, const char* path) {
  return guarded([&] {
    require(r, "result");
    require(path, "path");
    ts::io::write_text(path, r->report_text + "\n");
  });
}

const char* ts_result_report(const ts_result* r) { return r ? r->report_text.c_str() : ""; }

ts_status ts_synth(const char* shape, const char* params, const char* out_dir, const char* stem) {
  return guarded([&] {
    require(shape, "shape");
    require(out_dir, "out_dir");
    require(stem, "stem");
    Json p = Json::object();
    if (params && *params) {
      try {
        p = Json::parse(params);
      } catch (const Json::parse_error& e) {
        throw ts::InputError(std::string("invalid JSON: ") + e.what());
      }
      if (!p.is_object()) throw ts::InputError("synthetic parameters must be a JSON object");
    }
    const std::string name = shape;
    const std::set<std::string> common{"seed", "noise"};
    std::set<std::string> allowed;
    if (name == "circle") allowed = {"radius", "samples"};
    else if (name == "line") allowed = {"length", "samples"};
    else if (name == "square") allowed = {"side", "per_side"};
    else if (name == "rounded-square") allowed = {"side", "corner", "samples"};
    else if (name == "disk") allowed = {"width", "height", "radius", "cx", "cy", "background", "foreground"};
    else if (name == "polygon") allowed = {"width", "height", "sides", "radius", "rotation", "background", "foreground"};
    else if (name == "step-edge") allowed = {"width", "height", "offset", "background", "foreground"};
    else if (name == "gap-image") allowed = {"length", "gap", "background", "foreground"};
    else if (name == "tube3d") allowed = {"shape", "size", "radius", "direction_noise"};
    else throw ts::InputError("unknown synthetic shape: " + name);
    for (const auto& [k, v] : p.items())
      if (!allowed.count(k) && !common.count(k)) throw ts::InputError("unknown parameter '" + k + "' for " + name);

    const auto seed = p.value("seed", std::uint64_t{0});
    const double noise = p.value("noise", 0.0);
    ts::io::ensure_directory(out_dir);
    const std::string base = (std::filesystem::path(out_dir) / stem).string();
    Json manifest{{"shape", name}, {"params", p}, {"files", Json::array()}};
    auto add = [&](const std::string& path, const char* role) {
      manifest["files"].push_back({{"path", std::filesystem::path(path).filename().string()}, {"role", role}});
    };

    auto image_style = [&] {
      ts::synth::ImageStyle s;
      s.background = p.value("background", 50.0);
      s.foreground = p.value("foreground", 200.0);
      s.noise = noise;
      s.seed = seed;
      return s;
    };
    auto write_image = [&](const ts::synth::SyntheticImage& img) {
      ts::io::write_image(base + ".pgm", img.image);
      add(base + ".pgm", "image");
      ts::io::write_binary_mask(base + "_truth.pgm", img.truth, img.image.width, img.image.height);
      add(base + "_truth.pgm", "truth");
    };

    if (name == "circle" || name == "line" || name == "square" || name == "rounded-square") {
      ts::synth::CurveSamples clean, noisy;
      if (name == "circle") {
        const double R = p.value("radius", 20.0);
        const int M = p.value("samples", 64);
        clean = ts::synth::circle(R, M);
        noisy = ts::synth::circle(R, M, noise, seed);
      } else if (name == "line") {
        const double len = p.value("length", 40.0);
        const int M = p.value("samples", 41);
        clean = ts::synth::line(len, M);
        noisy = ts::synth::line(len, M, noise, seed);
      } else if (name == "square") {
        const double side = p.value("side", 20.0);
        const int per = p.value("per_side", 8);
        clean = ts::synth::square(side, per);
        noisy = ts::synth::square(side, per, noise, seed);
      } else {
        const double side = p.value("side", 40.0), corner = p.value("corner", 6.0);
        const int M = p.value("samples", 96);
        clean = ts::synth::rounded_square(side, corner, M);
        noisy = ts::synth::rounded_square(side, corner, M, noise, seed);
      }
      ts::io::write_points_csv(base + ".csv", noisy.points, 2);
      add(base + ".csv", "points");
      ts::io::write_curve_truth_csv(base + "_truth.csv", clean.points, clean.tangents, 2);
      add(base + "_truth.csv", "truth");
    } else if (name == "disk") {
      const int w = p.value("width", 64), h = p.value("height", 64);
      write_image(ts::synth::disk(w, h, p.value("cx", w / 2.0), p.value("cy", h / 2.0), p.value("radius", 20.0),
                                  image_style()));
    } else if (name == "polygon") {
      const int w = p.value("width", 64), h = p.value("height", 64), sides = p.value("sides", 5);
      const double R = p.value("radius", 22.0), rot = p.value("rotation", 0.1);
      if (sides < 3) throw ts::InputError("polygon needs at least 3 sides");
      std::vector<ts::Vec3> v;
      for (int k = 0; k < sides; ++k) {
        const double a = rot + 2.0 * std::numbers::pi * k / sides;
        v.emplace_back(w / 2.0 + R * std::cos(a), h / 2.0 + R * std::sin(a), 0.0);
      }
      write_image(ts::synth::polygon(w, h, v, image_style()));
    } else if (name == "step-edge") {
      const int w = p.value("width", 32), h = p.value("height", 32);
      write_image(ts::synth::step_edge(w, h, w / 2 + p.value("offset", 0.3), image_style()));
    } else if (name == "gap-image") {
      write_image(ts::synth::gap_image(p.value("length", 40), p.value("gap", 8), image_style()));
    } else {
      ts::synth::TubeStyle style;
      style.size = p.value("size", 64);
      style.tube_radius = p.value("radius", 2.0);
      style.direction_noise_deg = p.value("direction_noise", 0.0);
      style.seed = seed;
      const auto tube = ts::synth::tube(ts::synth::parse_tube_shape(p.value("shape", std::string("helix"))), style);
      ts::io::write_vfield(base + ".vfield", tube.field);
      add(base + ".vfield", "vfield");
      ts::io::write_curve_truth_csv(base + "_truth.csv", tube.curve, tube.curve_tangent, 3);
      add(base + "_truth.csv", "truth");
    }
    ts::io::write_text(base + ".json", manifest.dump(2) + "\n");
  });
}

ts_status ts_eval_arrays(const double* predicted, const unsigned char* truth, int width, int height, double tolerance,
                         int steps, ts_eval** out) {
  return guarded([&] {
    require(predicted, "predicted");
    require(truth, "truth");
    require(out, "out");
    if (width < 1 || height < 1) throw ts::InputError("mask dimensions must be positive");
    const std::size_t n = static_cast<std::size_t>(width) * height;
    std::vector<double> pred(predicted, predicted + n);
    std::vector<std::uint8_t> tr(truth, truth + n);
    auto e = std::make_unique<ts_eval>();
    e->result = ts::evaluate_masks(pred, tr, width, height, {tolerance, steps});
    *out = e.release();
  });
}

ts_status ts_eval_files(const char* predicted_pgm, const char* truth_pgm, double tolerance, int steps, ts_eval** out) {
  return guarded([&] {
    require(predicted_pgm, "predicted path");
    require(truth_pgm, "truth path");
    require(out, "out");
    int pw = 0, ph = 0, tw = 0, th = 0;
    const auto pred = ts::io::read_probability_mask(predicted_pgm, &pw, &ph);
    const auto truth = ts::io::read_probability_mask(truth_pgm, &tw, &th);
    if (pw != tw || ph != th) throw ts::InputError("predicted and truth masks differ in size");
    std::vector<std::uint8_t> tr(truth.size());
    for (std::size_t k = 0; k < tr.size(); ++k) tr[k] = truth[k] > 0.0;
    auto e = std::make_unique<ts_eval>();
    e->result = ts::evaluate_masks(pred, tr, pw, ph, {tolerance, steps});
    *out = e.release();
  });
}

void ts_eval_destroy(ts_eval* e) { delete e; }

size_t ts_eval_count(const ts_eval* e) { return e ? e->result.curve.size() : 0; }

ts_status ts_eval_point(const ts_eval* e, size_t k, double* threshold, double* precision, double* recall, double* f) {
  return guarded([&] {
    require(e, "eval");
    if (k >= e->result.curve.size()) throw ts::InputError("curve index out of range");
    const auto& pt = e->result.curve[k];
    if (threshold) *threshold = pt.threshold;
    if (precision) *precision = pt.precision;
    if (recall) *recall = pt.recall;
    if (f) *f = pt.f;
  });
}

size_t ts_eval_best(const ts_eval* e) { return e ? e->result.best : 0; }

ts_status ts_eval_write_curve(const ts_eval* e, const char* path) {
  return guarded([&] {
    require(e, "eval");
    require(path, "path");
    ts::io::write_text(path, ts::pr_curve_csv(e->result));
  });
}

}  // extern "C"
