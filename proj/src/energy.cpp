#include "thinstruct/energy.hpp"

#include <cmath>
#include <string>

#include "thinstruct/error.hpp"

namespace thinstruct {

void ProblemSpec::validate() const {
  if (!(sigma > 0.0)) throw InputError("sigma must be > 0");
  if (per_site_sigma && !(sigma_multiplier > 0.0)) throw InputError("sigma multiplier k must be > 0");
  if (!(tau >= 0.0)) throw InputError("tau must be >= 0");
  if (!(gamma >= 0.0)) throw InputError("gamma must be >= 0");
  if (!(beta >= 0.0)) throw InputError("beta must be >= 0");
  if (!(curvature.epsilon >= 0.0)) throw InputError("epsilon must be >= 0");
  if (alignment_power != 1 && alignment_power != 2) throw InputError("alignment power must be 1 or 2");
  if (mode == ProblemMode::point_cloud && (gamma != 0.0 || beta != 0.0))
    throw InputError("point-cloud mode requires gamma = beta = 0");
}

ProblemSpec ProblemSpec::edges() {
  ProblemSpec s;
  s.sigma = 1.0;
  s.gamma = 0.25;
  s.distance = DistanceMode::truncated;
  s.tau = 1.0;
  return s;
}

ProblemSpec ProblemSpec::point_cloud() {
  ProblemSpec s;
  s.mode = ProblemMode::point_cloud;
  s.distance = DistanceMode::euclidean;
  s.tau = 0.0;
  return s;
}

ProblemSpec ProblemSpec::vessels() {
  ProblemSpec s;
  s.per_site_sigma = true;
  s.sigma_multiplier = 20.0;
  s.beta = 0.5;
  s.gamma = 0.0;
  s.distance = DistanceMode::euclidean;
  s.tau = 0.0;
  return s;
}

void SiteSet::validate() const {
  if (dim != 2 && dim != 3) throw InputError("site dimension must be 2 or 3");
  const std::size_t n = positions.size();
  if (lambdas.size() != n) throw InputError("lambdas size mismatch");
  if (!priors.empty() && priors.size() != n) throw InputError("priors size mismatch");
  if (!scales.empty()) {
    if (scales.size() != n) throw InputError("scales size mismatch");
    for (std::size_t i = 0; i < n; ++i)
      if (!(scales[i] > 0.0)) throw InputError("site scale must be > 0 (site " + std::to_string(i) + ")");
  }
}

double site_sigma(const ProblemSpec& spec, const SiteSet& sites, std::size_t i) {
  if (spec.per_site_sigma && !sites.scales.empty()) return spec.sigma_multiplier * sites.scales[i];
  return spec.sigma;
}

double soft_distance(const ProblemSpec& spec, const TangentLine& l, const Vec3& p) {
  if (spec.distance == DistanceMode::truncated) return truncated_distance(l, p, spec.tau);
  return point_line_distance(l, p);
}

Vec3 denoised_point(const ProblemSpec& spec, const TangentLine& l, const Vec3& observed) {
  return spec.raw_anchor_points ? observed : project_onto_line(l, observed);
}

std::vector<Vec3> denoised_points(const ProblemSpec& spec, const SiteSet& sites,
                                  std::span<const TangentLine> L) {
  std::vector<Vec3> p(sites.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = denoised_point(spec, L[i], sites.positions[i]);
  return p;
}

double unary_potential(const ProblemSpec& spec, const SiteSet& sites, const TangentLine& l, std::size_t i) {
  const double s = site_sigma(spec, sites, i);
  const double d = soft_distance(spec, l, sites.positions[i]);
  double psi = d * d / (s * s) + sites.lambdas[i];
  if (spec.beta > 0.0 && sites.has_priors()) {
    const double m = misalignment(l, sites.priors[i]);
    psi += spec.beta * (spec.alignment_power == 2 ? m * m : m);
  }
  return psi;
}

double pairwise_potential(const ProblemSpec& spec, const TangentLine& li, const TangentLine& lj,
                          const Vec3& pi, const Vec3& pj) {
  return curvature_pair(li, lj, pi, pj, spec.curvature.kind) - spec.gamma;
}

Potentials compute_potentials(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                              std::span<const TangentLine> L) {
  Potentials pot;
  const std::size_t n = sites.size();
  pot.unary.resize(n);
  for (std::size_t i = 0; i < n; ++i) pot.unary[i] = unary_potential(spec, sites, L[i], i);
  const auto p = denoised_points(spec, sites, L);
  pot.pairwise.resize(graph.pair_count());
  for (std::size_t k = 0; k < graph.pair_count(); ++k) {
    const auto [i, j] = graph.pairs[k];
    pot.pairwise[k] = pairwise_potential(spec, L[i], L[j], p[i], p[j]);
  }
  return pot;
}

double expected_energy(const NeighborGraph& graph, const Potentials& pot, std::span<const double> Q) {
  double pairs = 0.0;
  for (std::size_t k = 0; k < graph.pair_count(); ++k) {
    const auto [i, j] = graph.pairs[k];
    pairs += graph.weights[k] * pot.pairwise[k] * Q[i] * Q[j];
  }
  double unary = 0.0;
  for (std::size_t i = 0; i < pot.unary.size(); ++i) unary += pot.unary[i] * Q[i];
  return pairs + unary;
}

double labeling_energy(const NeighborGraph& graph, const Potentials& pot, const Labeling& x) {
  double pairs = 0.0;
  for (std::size_t k = 0; k < graph.pair_count(); ++k) {
    const auto [i, j] = graph.pairs[k];
    if (x[i] && x[j]) pairs += graph.weights[k] * pot.pairwise[k];
  }
  double unary = 0.0;
  for (std::size_t i = 0; i < pot.unary.size(); ++i)
    if (x[i]) unary += pot.unary[i];
  return pairs + unary;
}

double total_energy(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                    std::span<const TangentLine> L, const Labeling& x) {
  if (x.size() != sites.size()) throw InputError("labeling size mismatch");
  return labeling_energy(graph, compute_potentials(spec, sites, graph, L), x);
}

double expected_energy(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                       std::span<const TangentLine> L, std::span<const double> Q) {
  if (Q.size() != sites.size()) throw InputError("marginal vector size mismatch");
  return expected_energy(graph, compute_potentials(spec, sites, graph, L), Q);
}

}  // namespace thinstruct
