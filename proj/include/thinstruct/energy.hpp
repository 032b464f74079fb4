#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "thinstruct/geometry.hpp"
#include "thinstruct/graph.hpp"

namespace thinstruct {

enum class DistanceMode { euclidean, truncated };
enum class ProblemMode { detection, point_cloud };

/// Energy configuration shared by every pipeline.
struct ProblemSpec {
  CurvatureTerm curvature;
  double sigma = 1.0;
  /// Vessel mode: the soft-constraint scale of site i is sigma_multiplier * scales[i].
  bool per_site_sigma = false;
  double sigma_multiplier = 20.0;
  double gamma = 0.0;  // reward for every active pair
  double beta = 0.0;   // weight of the direction prior
  DistanceMode distance = DistanceMode::truncated;
  double tau = 1.0;
  int alignment_power = 2;  // exponent of m(l, g), 1 or 2
  ProblemMode mode = ProblemMode::detection;
  /// Use observed sites instead of their projections inside the curvature term.
  bool raw_anchor_points = false;

  void validate() const;

  static ProblemSpec edges();        // sigma 1, gamma 0.25, truncated tau 1
  static ProblemSpec point_cloud();  // euclidean, all indicators on
  static ProblemSpec vessels();      // beta 0.5, k 20, per-site sigma, euclidean
};

/// Observed sites with their unary potentials and optional priors/scales.
struct SiteSet {
  int dim = 2;
  std::vector<Vec3> positions;
  std::vector<double> lambdas;
  std::vector<Vec3> priors;    // empty when no direction prior is available
  std::vector<double> scales;  // empty unless per-site sigma is used

  std::size_t size() const { return positions.size(); }
  bool has_priors() const { return !priors.empty(); }
  void validate() const;
};

using Labeling = std::vector<std::uint8_t>;
using Tangents = std::vector<TangentLine>;

/// Effective soft-constraint scale of site i.
double site_sigma(const ProblemSpec& spec, const SiteSet& sites, std::size_t i);

/// Soft-constraint distance ||l - p||_+ under the configured distance mode.
double soft_distance(const ProblemSpec& spec, const TangentLine& l, const Vec3& p);

/// The point used for site i inside curvature terms: the projection of the
/// observed site onto its own tangent (or the raw site, if configured).
Vec3 denoised_point(const ProblemSpec& spec, const TangentLine& l, const Vec3& observed);
std::vector<Vec3> denoised_points(const ProblemSpec& spec, const SiteSet& sites, std::span<const TangentLine> L);

double unary_potential(const ProblemSpec& spec, const SiteSet& sites, const TangentLine& l, std::size_t i);
double pairwise_potential(const ProblemSpec& spec, const TangentLine& li, const TangentLine& lj,
                          const Vec3& pi, const Vec3& pj);

/// Unary and pairwise potential tables at fixed tangents.
struct Potentials {
  std::vector<double> unary;     // per site
  std::vector<double> pairwise;  // per pair, weight not included
};

Potentials compute_potentials(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                              std::span<const TangentLine> L);

double total_energy(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                    std::span<const TangentLine> L, const Labeling& x);

double expected_energy(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                       std::span<const TangentLine> L, std::span<const double> Q);

/// sum_pairs w psi_ij q_i q_j + sum_i psi_i q_i over precomputed potentials.
double expected_energy(const NeighborGraph& graph, const Potentials& pot, std::span<const double> Q);
double labeling_energy(const NeighborGraph& graph, const Potentials& pot, const Labeling& x);

}  // namespace thinstruct
