#pragma once

#include <span>
#include <string>
#include <vector>

#include "thinstruct/energy.hpp"

namespace thinstruct {

/// Damping and stopping parameters of the inexact Levenberg-Marquardt loop.
struct TrustRegionConfig {
  double initial_lambda = 1e-4;
  double lambda_increase = 2.0;        // factor applied after a rejected step
  double min_lambda_decrease = 1.0 / 3.0;
  int max_iterations = 50;
  double inner_tol = 1e-2;             // relative PCG tolerance
  double tight_inner_tol = 1e-6;       // used once progress slows down
  double gradient_tol = 1e-10;
  double relative_decrease_tol = 1e-9;
  int max_cg_iterations = 50;
  int max_cg_retries = 5;
  double max_lambda = 1e16;
  double weight_min = 1e-3;            // IRLS weight cap
  double weight_max = 1e3;

  void validate() const;
};

struct LmIterationStats {
  int iter = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double lambda_lm = 0.0;
  double rho = 0.0;
  bool accepted = false;
  int cg_iters = 0;
};

enum class LmTermination { empty, gradient, relative_decrease, max_iterations, damping_limit };
const char* to_string(LmTermination t);

struct LmResult {
  Tangents L;
  std::vector<LmIterationStats> stats;
  double initial_objective = 0.0;  // L-dependent part of the expected energy
  double final_objective = 0.0;
  int accepted_steps = 0;
  LmTermination termination = LmTermination::empty;
};

enum class ResidualKind { curvature, distance, alignment };

/// One dense residual block with its Jacobian (row-major, rows x cols).
/// Curvature blocks touch sites (site_a, site_b); site blocks only site_a.
struct JacobianBlock {
  ResidualKind kind = ResidualKind::distance;
  int id = 0;  // pair id or site id
  int site_a = -1;
  int site_b = -1;
  int rows = 0;
  int cols = 0;
  std::vector<double> residual;
  std::vector<double> values;
};

/// Per-pair IRLS weights for the absolute-curvature surrogate: `forward`
/// multiplies the dist(l_i, p_j) term and `backward` the dist(l_j, p_i) term.
struct DirectedWeights {
  std::vector<double> forward;
  std::vector<double> backward;
};

DirectedWeights abs_curvature_weights(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                                      std::span<const TangentLine> L, double epsilon, double weight_min = 1e-3,
                                      double weight_max = 1e3);

/// Weighted nonlinear least-squares view of the expected energy at fixed marginals.
///
/// Each site is parameterized locally around its current tangent by an anchor
/// offset u (dim entries) and dim-1 rotation angles, so the system has
/// 2*dim-1 parameters per active site. Sites with q below kMarginalCutoff and
/// pairs with q_i q_j below it carry no residuals.
class ResidualSystem {
 public:
  static constexpr double kMarginalCutoff = 1e-12;

  ResidualSystem(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                 std::span<const double> Q, const TrustRegionConfig& config = {});

  int dim() const { return sites_->dim; }
  int params_per_site() const { return 2 * sites_->dim - 1; }
  const std::vector<int>& active_sites() const { return active_; }
  int parameter_count() const { return static_cast<int>(active_.size()) * params_per_site(); }
  bool empty() const { return active_.empty(); }

  /// True when the absolute-curvature or un-squared alignment surrogate is in use.
  bool reweighted() const;

  /// Recomputes the IRLS weights from the current tangents.
  void update_weights(std::span<const TangentLine> L);

  /// Sum of squared residuals under the current weights.
  double objective(std::span<const TangentLine> L) const;
  /// L-dependent part of the expected energy (exact curvature kind, no weights).
  double energy_objective(std::span<const TangentLine> L) const;

  /// Residual vector at the tangents displaced by local parameters `delta`
  /// (size parameter_count(); empty means zero), blocks in build order.
  std::vector<double> residuals(std::span<const TangentLine> L, std::span<const double> delta = {}) const;
  std::vector<JacobianBlock> jacobian(std::span<const TangentLine> L) const;

  /// Tangents after a local step; directions are renormalized and anchors
  /// moved to the projection of the observed site (a pure gauge change).
  Tangents apply_step(std::span<const TangentLine> L, std::span<const double> delta) const;

  struct NormalEquations {
    double objective = 0.0;
    std::vector<double> gradient;  // J^T r
    std::vector<double> diag;      // P x P per active site
    std::vector<double> offdiag;   // P x P per curvature block (site_a, site_b)
    std::vector<std::pair<int, int>> offdiag_sites;  // local indices
  };
  NormalEquations normal_equations(std::span<const TangentLine> L) const;

  /// Names the first block whose residual is not finite, or "" if none.
  std::string find_nonfinite_block(std::span<const TangentLine> L) const;

  std::size_t curvature_block_count() const { return pair_blocks_.size(); }
  std::size_t distance_block_count() const { return distance_blocks_.size(); }
  std::size_t alignment_block_count() const { return alignment_blocks_.size(); }

  struct PairBlock {
    int pair, i, j, li, lj;  // li, lj: local (active) indices
    double coeff;            // w_ij q_i q_j
  };
  struct SiteBlock {
    int site, local;
    double coeff;  // q_i / sigma_i^2 or beta q_i
  };

 private:
  template <int D>
  friend struct ResidualKernels;

  const ProblemSpec* spec_;
  const SiteSet* sites_;
  const NeighborGraph* graph_;
  TrustRegionConfig config_;
  std::vector<int> active_;
  std::vector<int> local_of_site_;
  std::vector<PairBlock> pair_blocks_;
  std::vector<SiteBlock> distance_blocks_;
  std::vector<SiteBlock> alignment_blocks_;
  std::vector<double> w_forward_, w_backward_;  // per pair block
  std::vector<double> w_align_;                 // per alignment block
};

LmResult lm_solve(ResidualSystem& system, std::span<const TangentLine> L0, const TrustRegionConfig& config = {});

/// Convenience: builds the residual system for marginals Q and solves.
LmResult lm_solve(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                  std::span<const TangentLine> L0, std::span<const double> Q, const TrustRegionConfig& config = {});

}  // namespace thinstruct
