#pragma once

#include <span>
#include <vector>

#include "thinstruct/energy.hpp"
#include "thinstruct/inference.hpp"
#include "thinstruct/solver.hpp"

namespace thinstruct {

/// Largest site count solved exactly by enumeration.
inline constexpr std::size_t kExhaustiveLimit = 20;

/// Minimizes total_energy over labelings at fixed tangents: exhaustive for
/// small problems, ICM from x0 otherwise (or always, with force_icm).
Labeling x_step(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                std::span<const TangentLine> L, const Labeling& x0, bool force_icm = false);
/// Exhaustive minimizer over precomputed potentials (gray-code order, ties keep the first found).
Labeling exhaustive_minimizer(const NeighborGraph& graph, const Potentials& pot);

struct BcdOptions {
  int max_outer = 50;
  double outer_tol = 1e-9;  // relative decrease of the tangent step
  bool force_icm = false;
  TrustRegionConfig solver;
};

struct BcdState {
  Tangents L;
  Labeling x;
  std::vector<TraceRecord> trace;  // expected_energy holds total_energy
  int outer_iterations = 0;
  bool converged = false;
};

BcdState run_bcd(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                 std::span<const TangentLine> L0, const Labeling& x0, const BcdOptions& opts = {});

}  // namespace thinstruct
