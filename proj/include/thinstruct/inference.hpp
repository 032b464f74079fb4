#pragma once

#include <span>
#include <string>
#include <vector>

#include "thinstruct/energy.hpp"
#include "thinstruct/solver.hpp"

namespace thinstruct {

/// sigmoid(t) = 1 / (1 + exp(-t)), evaluated without overflow.
double sigmoid(double t);
/// Entropy of a Bernoulli(q) variable in nats; 0 at q = 0 and q = 1.
double bernoulli_entropy(double q);

/// Lower bound: -expected_energy + sum of Bernoulli entropies.
double elbo(const NeighborGraph& graph, const Potentials& pot, std::span<const double> Q);

/// q_i = sigmoid(-psi_i) with psi_i evaluated at L0.
std::vector<double> init_marginals(const ProblemSpec& spec, const SiteSet& sites, std::span<const TangentLine> L0);

struct MeanFieldOptions {
  double tol = 1e-6;
  int max_sweeps = 100;
  bool jacobi = false;   // parallel update from the previous sweep, damped
  double damping = 0.5;  // Jacobi only: q <- (1-d) q + d q_new
  void validate() const;
};

/// One pass over all sites in id order, updating Q in place.
/// Returns the largest absolute change.
double mean_field_sweep(const NeighborGraph& graph, const Potentials& pot, std::vector<double>& Q,
                        const MeanFieldOptions& opts = {});
double mean_field_sweep(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                        std::span<const TangentLine> L, std::vector<double>& Q);

struct MeanFieldResult {
  std::vector<double> Q;
  int sweeps = 0;
  bool converged = false;
  double max_delta = 0.0;
  std::vector<double> expected_energy;  // after each sweep, [0] = before the first
  std::vector<double> free_energy;      // expected energy minus entropy, same indexing
};

MeanFieldResult run_mean_field(const NeighborGraph& graph, const Potentials& pot, std::span<const double> Q0,
                               const MeanFieldOptions& opts = {});
MeanFieldResult run_mean_field(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                               std::span<const TangentLine> L, std::span<const double> Q0,
                               const MeanFieldOptions& opts = {});

/// Iterated conditional modes on a binary labeling, sites in id order. A site
/// flips only if the flip strictly lowers the energy. Returns the number of sweeps.
int icm(const NeighborGraph& graph, const Potentials& pot, Labeling& x, int max_sweeps = 10000);

struct TraceRecord {
  int outer = 0;
  std::string phase;  // "L" or "Q"
  double expected_energy = 0.0;
  double elbo = 0.0;
  double max_delta = 0.0;
  int accepted_steps = 0;
};

inline TrustRegionConfig step_solver() {
  TrustRegionConfig c;
  c.max_iterations = 10;
  return c;
}

struct InferenceOptions {
  double outer_tol = 1e-6;
  int max_outer = 50;
  MeanFieldOptions mean_field;
  /// Each tangent half-step is a partial solve; the outer loop revisits it.
  TrustRegionConfig solver = step_solver();
  /// Hard-indicator mode: Q stays in {0,1} and the Q-step is ICM.
  bool degenerate = false;
};

struct InferenceState {
  Tangents L;
  std::vector<double> Q;
  std::vector<TraceRecord> trace;
  int outer_iterations = 0;
  int mean_field_sweeps = 0;
  int lm_iterations = 0;
  int accepted_steps = 0;
  bool converged = false;
  /// Every Q-step lowered (or kept) expected_energy - entropy, every
  /// accepted L-step lowered expected_energy; largest violation seen.
  double max_descent_violation = 0.0;
};

/// Alternates tangent solves at fixed Q with mean-field updates at fixed L.
/// Q0 empty means init_marginals(L0).
InferenceState run_inference(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                             std::span<const TangentLine> L0, const InferenceOptions& opts = {},
                             std::span<const double> Q0 = {});

}  // namespace thinstruct
