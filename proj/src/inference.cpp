#include "thinstruct/inference.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "thinstruct/error.hpp"
#include "thinstruct/parallel.hpp"

namespace thinstruct {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double bernoulli_entropy(double q) {
  double h = 0.0;
  if (q > 0.0) h -= q * std::log(q);
  if (q < 1.0) h -= (1.0 - q) * std::log1p(-q);
  return h;
}

double elbo(const NeighborGraph& graph, const Potentials& pot, std::span<const double> Q) {
  double h = 0.0;
  for (double q : Q) h += bernoulli_entropy(q);
  return -expected_energy(graph, pot, Q) + h;
}

std::vector<double> init_marginals(const ProblemSpec& spec, const SiteSet& sites, std::span<const TangentLine> L0) {
  if (L0.size() != sites.size()) throw InputError("tangent count does not match site count");
  std::vector<double> Q(sites.size());
  for (std::size_t i = 0; i < Q.size(); ++i) Q[i] = sigmoid(-unary_potential(spec, sites, L0[i], i));
  return Q;
}

void MeanFieldOptions::validate() const {
  if (!(tol > 0.0)) throw InputError("mean-field tolerance must be > 0");
  if (max_sweeps < 0) throw InputError("max sweeps must be >= 0");
  if (!(damping > 0.0 && damping <= 1.0)) throw InputError("damping must be in (0, 1]");
}

namespace {

double local_field(const NeighborGraph& graph, const Potentials& pot, const std::vector<double>& Q, std::size_t i) {
  double f = pot.unary[i];
  for (const auto& nb : graph.neighbors[i]) f += graph.weights[nb.pair] * pot.pairwise[nb.pair] * Q[nb.site];
  return f;
}

double free_energy(const NeighborGraph& graph, const Potentials& pot, std::span<const double> Q) {
  return -elbo(graph, pot, Q);
}

}  // namespace

double mean_field_sweep(const NeighborGraph& graph, const Potentials& pot, std::vector<double>& Q,
                        const MeanFieldOptions& opts) {
  const std::size_t n = Q.size();
  double max_delta = 0.0;
  if (!opts.jacobi) {
    for (std::size_t i = 0; i < n; ++i) {
      const double q = sigmoid(-local_field(graph, pot, Q, i));
      max_delta = std::max(max_delta, std::abs(q - Q[i]));
      Q[i] = q;
    }
    return max_delta;
  }
  std::vector<double> next(n);
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      next[i] = (1.0 - opts.damping) * Q[i] + opts.damping * sigmoid(-local_field(graph, pot, Q, i));
  });
  for (std::size_t i = 0; i < n; ++i) max_delta = std::max(max_delta, std::abs(next[i] - Q[i]));
  Q.swap(next);
  return max_delta;
}

double mean_field_sweep(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                        std::span<const TangentLine> L, std::vector<double>& Q) {
  if (Q.size() != sites.size()) throw InputError("marginal vector size mismatch");
  return mean_field_sweep(graph, compute_potentials(spec, sites, graph, L), Q);
}

MeanFieldResult run_mean_field(const NeighborGraph& graph, const Potentials& pot, std::span<const double> Q0,
                               const MeanFieldOptions& opts) {
  opts.validate();
  MeanFieldResult res;
  res.Q.assign(Q0.begin(), Q0.end());
  for (double q : res.Q)
    if (!(q >= 0.0 && q <= 1.0)) throw InputError("marginals must lie in [0, 1]");
  res.expected_energy.push_back(expected_energy(graph, pot, res.Q));
  res.free_energy.push_back(free_energy(graph, pot, res.Q));
  while (res.sweeps < opts.max_sweeps) {
    res.max_delta = mean_field_sweep(graph, pot, res.Q, opts);
    ++res.sweeps;
    res.expected_energy.push_back(expected_energy(graph, pot, res.Q));
    res.free_energy.push_back(free_energy(graph, pot, res.Q));
    if (res.max_delta < opts.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

MeanFieldResult run_mean_field(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                               std::span<const TangentLine> L, std::span<const double> Q0,
                               const MeanFieldOptions& opts) {
  if (Q0.size() != sites.size()) throw InputError("marginal vector size mismatch");
  return run_mean_field(graph, compute_potentials(spec, sites, graph, L), Q0, opts);
}

int icm(const NeighborGraph& graph, const Potentials& pot, Labeling& x, int max_sweeps) {
  int sweeps = 0;
  bool changed = true;
  while (changed && sweeps < max_sweeps) {
    changed = false;
    ++sweeps;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double gain = pot.unary[i];  // E(x_i = 1) - E(x_i = 0)
      for (const auto& nb : graph.neighbors[i])
        if (x[nb.site]) gain += graph.weights[nb.pair] * pot.pairwise[nb.pair];
      if (x[i] == 0 && gain < 0.0) {
        x[i] = 1;
        changed = true;
      } else if (x[i] == 1 && gain > 0.0) {
        x[i] = 0;
        changed = true;
      }
    }
  }
  return sweeps;
}

namespace {

double relative_decrease(double before, double after) {
  return (before - after) / std::max(std::abs(before), 1e-300);
}

}  // namespace

InferenceState run_inference(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                             std::span<const TangentLine> L0, const InferenceOptions& opts,
                             std::span<const double> Q0) {
  spec.validate();
  sites.validate();
  opts.mean_field.validate();
  opts.solver.validate();
  if (L0.size() != sites.size()) throw InputError("tangent count does not match site count");
  if (!Q0.empty() && Q0.size() != sites.size()) throw InputError("marginal vector size mismatch");
  if (opts.max_outer < 0) throw InputError("max outer iterations must be >= 0");

  InferenceState st;
  st.L.assign(L0.begin(), L0.end());
  st.Q = Q0.empty() ? init_marginals(spec, sites, st.L) : std::vector<double>(Q0.begin(), Q0.end());
  if (opts.degenerate)
    for (double& q : st.Q) q = q >= 0.5 ? 1.0 : 0.0;

  auto note_violation = [&](double before, double after) {
    st.max_descent_violation = std::max(st.max_descent_violation, after - before);
  };

  Potentials pot = compute_potentials(spec, sites, graph, st.L);
  double objective = free_energy(graph, pot, st.Q);

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    st.outer_iterations = outer + 1;
    const double start = objective;

    LmResult lm;
    try {
      lm = lm_solve(spec, sites, graph, st.L, st.Q, opts.solver);
    } catch (const NumericalError& e) {
      std::ostringstream os;
      os << "outer iteration " << outer << ": " << e.what();
      throw NumericalError(os.str());
    }
    st.L = std::move(lm.L);
    st.lm_iterations += static_cast<int>(lm.stats.size());
    st.accepted_steps += lm.accepted_steps;
    // Descent of every accepted step on the L-dependent part.
    double prev = lm.initial_objective;
    for (const auto& s : lm.stats)
      if (s.accepted) {
        note_violation(prev, s.objective);
        prev = s.objective;
      }
    pot = compute_potentials(spec, sites, graph, st.L);
    const double after_l = free_energy(graph, pot, st.Q);
    note_violation(start, after_l);
    st.trace.push_back({outer, "L", expected_energy(graph, pot, st.Q), -after_l, 0.0, lm.accepted_steps});

    double max_delta = 0.0;
    if (opts.degenerate) {
      Labeling x(st.Q.size());
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = st.Q[i] >= 0.5 ? 1 : 0;
      icm(graph, pot, x);
      for (std::size_t i = 0; i < x.size(); ++i) {
        max_delta = std::max(max_delta, std::abs(double(x[i]) - st.Q[i]));
        st.Q[i] = x[i];
      }
      ++st.mean_field_sweeps;
    } else {
      const auto mf = run_mean_field(graph, pot, st.Q, opts.mean_field);
      for (std::size_t k = 1; k < mf.free_energy.size(); ++k) note_violation(mf.free_energy[k - 1], mf.free_energy[k]);
      st.Q = mf.Q;
      st.mean_field_sweeps += mf.sweeps;
      max_delta = mf.max_delta;
    }
    objective = free_energy(graph, pot, st.Q);
    note_violation(after_l, objective);
    st.trace.push_back({outer, "Q", expected_energy(graph, pot, st.Q), -objective, max_delta, 0});

    if (opts.degenerate) {
      // Same rule as block-coordinate descent: labels fixed and the
      // tangent step no longer makes progress.
      if (max_delta == 0.0 && relative_decrease(start, after_l) < opts.outer_tol) {
        st.converged = true;
        break;
      }
    } else if (relative_decrease(start, objective) < opts.outer_tol) {
      st.converged = true;
      break;
    }
  }
  return st;
}

}  // namespace thinstruct
