#include "config.hpp"

#include "thinstruct/error.hpp"

namespace thinstruct::config {

Json defaults() {
  return Json{
      // energy
      {"sigma", 1.0},
      {"gamma", 0.25},
      {"tau", 1.0},
      {"curvature", "squared"},
      {"epsilon", 0.1},
      {"distance", "truncated"},
      {"alignment_power", 2},
      {"raw_anchor_points", false},
      // edge pipeline
      {"lambda_offset", 1.8},
      {"lambda_slope", 1.4},
      {"normalize", "std"},
      {"init", "perpendicular"},
      {"scale", 2},
      {"q_min", 0.0},
      // inference
      {"outer_tol", 1e-6},
      {"max_outer", 50},
      {"mf_tol", 1e-6},
      {"max_sweeps", 100},
      {"jacobi", false},
      {"damping", 0.5},
      // trust region
      {"lm_max_iterations", 50},
      {"lm_step_iterations", 10},
      {"lm_initial_lambda", 1e-4},
      {"lm_inner_tol", 1e-2},
      {"lm_gradient_tol", 1e-10},
      {"lm_relative_tol", 1e-9},
      {"lm_max_cg_iterations", 50},
      // point clouds
      {"knn", 4},
      // vessels
      {"beta", 0.5},
      {"k", 20.0},
      {"keep", 0.15},
      {"low", 0.1},
      {"high", 0.3},
      // run
      {"threads", 1},
      {"seed", 0},
      {"verbose", false},
  };
}

void validate_key(const std::string& key, const Json& value) {
  const Json d = defaults();
  const auto it = d.find(key);
  if (it == d.end()) throw InputError("unknown configuration key: " + key);
  const bool ok = (it->is_number() && value.is_number()) || (it->is_boolean() && value.is_boolean()) ||
                  (it->is_string() && value.is_string());
  if (!ok) throw InputError("configuration key " + key + " has the wrong type");
  if (it->is_number_integer() && !value.is_number_integer()) throw InputError("configuration key " + key + " must be an integer");
}

Json merged(const Json& overrides) {
  if (!overrides.is_object()) throw InputError("configuration must be a JSON object");
  Json cfg = defaults();
  for (const auto& [key, value] : overrides.items()) {
    validate_key(key, value);
    cfg[key] = value;
  }
  return cfg;
}

namespace {

CurvatureTerm curvature(const Json& cfg) {
  CurvatureTerm c;
  const auto kind = cfg.at("curvature").get<std::string>();
  if (kind == "squared") c.kind = CurvatureKind::squared;
  else if (kind == "abs" || kind == "absolute") c.kind = CurvatureKind::absolute;
  else throw InputError("curvature must be 'squared' or 'abs'");
  c.epsilon = cfg.at("epsilon").get<double>();
  return c;
}

GradientNormalization normalization(const Json& cfg) {
  const auto n = cfg.at("normalize").get<std::string>();
  if (n == "std") return GradientNormalization::std_dev;
  if (n == "variance") return GradientNormalization::variance;
  throw InputError("normalize must be 'std' or 'variance'");
}

LikelihoodMap likelihood(const Json& cfg) {
  return {cfg.at("lambda_offset").get<double>(), cfg.at("lambda_slope").get<double>()};
}

}  // namespace

ProblemSpec problem_spec(const Json& cfg) {
  ProblemSpec s = ProblemSpec::edges();
  s.curvature = curvature(cfg);
  s.sigma = cfg.at("sigma").get<double>();
  s.gamma = cfg.at("gamma").get<double>();
  s.tau = cfg.at("tau").get<double>();
  const auto d = cfg.at("distance").get<std::string>();
  if (d == "truncated") s.distance = DistanceMode::truncated;
  else if (d == "euclidean") s.distance = DistanceMode::euclidean;
  else throw InputError("distance must be 'truncated' or 'euclidean'");
  s.alignment_power = cfg.at("alignment_power").get<int>();
  s.raw_anchor_points = cfg.at("raw_anchor_points").get<bool>();
  s.validate();
  return s;
}

TrustRegionConfig solver_config(const Json& cfg) {
  TrustRegionConfig c;
  c.max_iterations = cfg.at("lm_max_iterations").get<int>();
  c.initial_lambda = cfg.at("lm_initial_lambda").get<double>();
  c.inner_tol = cfg.at("lm_inner_tol").get<double>();
  c.gradient_tol = cfg.at("lm_gradient_tol").get<double>();
  c.relative_decrease_tol = cfg.at("lm_relative_tol").get<double>();
  c.max_cg_iterations = cfg.at("lm_max_cg_iterations").get<int>();
  c.validate();
  return c;
}

InferenceOptions inference_options(const Json& cfg) {
  InferenceOptions o;
  o.outer_tol = cfg.at("outer_tol").get<double>();
  o.max_outer = cfg.at("max_outer").get<int>();
  o.mean_field.tol = cfg.at("mf_tol").get<double>();
  o.mean_field.max_sweeps = cfg.at("max_sweeps").get<int>();
  o.mean_field.jacobi = cfg.at("jacobi").get<bool>();
  o.mean_field.damping = cfg.at("damping").get<double>();
  o.mean_field.validate();
  o.solver = solver_config(cfg);
  o.solver.max_iterations = cfg.at("lm_step_iterations").get<int>();
  o.solver.validate();
  if (!(o.outer_tol > 0.0)) throw InputError("outer_tol must be > 0");
  if (o.max_outer < 0) throw InputError("max_outer must be >= 0");
  return o;
}

EdgeParams edge_params(const Json& cfg) {
  EdgeParams p;
  p.spec = problem_spec(cfg);
  p.likelihood = likelihood(cfg);
  p.normalization = normalization(cfg);
  const auto init = cfg.at("init").get<std::string>();
  if (init == "perpendicular") p.init = InitMode::perpendicular;
  else if (init == "paper-literal" || init == "collinear") p.init = InitMode::paper_literal;
  else throw InputError("init must be 'perpendicular' or 'paper-literal'");
  p.scale = cfg.at("scale").get<int>();
  if (p.scale < 1) throw InputError("scale must be >= 1");
  p.q_min = cfg.at("q_min").get<double>();
  p.inference = inference_options(cfg);
  return p;
}

PointCloudParams point_cloud_params(const Json& cfg) {
  PointCloudParams p;
  p.sigma = cfg.at("sigma").get<double>();
  if (!(p.sigma > 0.0)) throw InputError("sigma must be > 0");
  p.curvature = curvature(cfg);
  p.k_nn = cfg.at("knn").get<int>();
  if (p.k_nn < 1) throw InputError("knn must be >= 1");
  p.solver = solver_config(cfg);
  return p;
}

VesselParams vessel_params(const Json& cfg) {
  VesselParams p;
  p.beta = cfg.at("beta").get<double>();
  p.k = cfg.at("k").get<double>();
  p.keep_fraction = cfg.at("keep").get<double>();
  p.alignment_power = cfg.at("alignment_power").get<int>();
  p.curvature = curvature(cfg);
  p.likelihood = likelihood(cfg);
  p.normalization = normalization(cfg);
  p.inference = inference_options(cfg);
  if (!(p.beta >= 0.0)) throw InputError("beta must be >= 0");
  if (!(p.k > 0.0)) throw InputError("k must be > 0");
  if (!(p.keep_fraction > 0.0 && p.keep_fraction <= 1.0)) throw InputError("keep must be in (0, 1]");
  if (p.alignment_power != 1 && p.alignment_power != 2) throw InputError("alignment_power must be 1 or 2");
  return p;
}

void check(const Json& cfg) {
  edge_params(cfg);
  point_cloud_params(cfg);
  vessel_params(cfg);
  if (cfg.at("threads").get<int>() < 0) throw InputError("threads must be >= 0");
  // low <= high is checked when ridges are fitted, so the two can be set in either order
  if (!(cfg.at("low").get<double>() >= 0.0) || !(cfg.at("high").get<double>() >= 0.0))
    throw InputError("hysteresis thresholds must be >= 0");
}

}  // namespace thinstruct::config
