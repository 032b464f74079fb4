#include "thinstruct/bcd.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "thinstruct/error.hpp"

namespace thinstruct {

Labeling exhaustive_minimizer(const NeighborGraph& graph, const Potentials& pot) {
  const std::size_t n = pot.unary.size();
  if (n > kExhaustiveLimit) throw InputError("too many sites for exhaustive enumeration");
  Labeling x(n, 0), best(n, 0);
  double energy = 0.0;
  double best_energy = 0.0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t k = 1; k < total; ++k) {
    const auto i = static_cast<std::size_t>(std::countr_zero(k));
    double delta = pot.unary[i];
    for (const auto& nb : graph.neighbors[i])
      if (x[nb.site]) delta += graph.weights[nb.pair] * pot.pairwise[nb.pair];
    if (x[i]) {
      energy -= delta;
      x[i] = 0;
    } else {
      energy += delta;
      x[i] = 1;
    }
    if (energy < best_energy) {
      best_energy = energy;
      best = x;
    }
  }
  return best;
}

Labeling x_step(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                std::span<const TangentLine> L, const Labeling& x0, bool force_icm) {
  if (x0.size() != sites.size()) throw InputError("labeling size mismatch");
  const Potentials pot = compute_potentials(spec, sites, graph, L);
  if (!force_icm && sites.size() <= kExhaustiveLimit) {
    Labeling best = exhaustive_minimizer(graph, pot);
    // Incremental sums drift; keep x0 unless the optimum is genuinely lower.
    if (labeling_energy(graph, pot, best) < labeling_energy(graph, pot, x0)) return best;
    return x0;
  }
  Labeling x = x0;
  icm(graph, pot, x);
  return x;
}

BcdState run_bcd(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                 std::span<const TangentLine> L0, const Labeling& x0, const BcdOptions& opts) {
  spec.validate();
  sites.validate();
  opts.solver.validate();
  if (L0.size() != sites.size()) throw InputError("tangent count does not match site count");
  if (x0.size() != sites.size()) throw InputError("labeling size mismatch");

  BcdState st;
  st.L.assign(L0.begin(), L0.end());
  st.x = x0;
  std::vector<double> Q(x0.size());
  for (std::size_t i = 0; i < Q.size(); ++i) Q[i] = x0[i] ? 1.0 : 0.0;

  double energy = total_energy(spec, sites, graph, st.L, st.x);
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    st.outer_iterations = outer + 1;
    const double start = energy;
    LmResult lm;
    try {
      lm = lm_solve(spec, sites, graph, st.L, Q, opts.solver);
    } catch (const NumericalError& e) {
      std::ostringstream os;
      os << "outer iteration " << outer << ": " << e.what();
      throw NumericalError(os.str());
    }
    st.L = std::move(lm.L);
    const Potentials pot = compute_potentials(spec, sites, graph, st.L);
    const double after_l = labeling_energy(graph, pot, st.x);
    st.trace.push_back({outer, "L", after_l, -after_l, 0.0, lm.accepted_steps});

    Labeling x;
    if (!opts.force_icm && sites.size() <= kExhaustiveLimit) {
      x = exhaustive_minimizer(graph, pot);
      if (!(labeling_energy(graph, pot, x) < after_l)) x = st.x;
    } else {
      x = st.x;
      icm(graph, pot, x);
    }
    double max_delta = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] != st.x[i]) max_delta = 1.0;
      Q[i] = x[i] ? 1.0 : 0.0;
    }
    st.x = std::move(x);
    energy = labeling_energy(graph, pot, st.x);
    st.trace.push_back({outer, "Q", energy, -energy, max_delta, 0});

    const double rel = (start - after_l) / std::max(std::abs(start), 1e-300);
    if (max_delta == 0.0 && rel < opts.outer_tol) {
      st.converged = true;
      break;
    }
  }
  return st;
}

}  // namespace thinstruct
