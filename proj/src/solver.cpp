#include "thinstruct/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "jet.hpp"
#include "thinstruct/error.hpp"
#include "thinstruct/parallel.hpp"

namespace thinstruct {

using detail::dot;
using detail::Jet;
using detail::V3;
using detail::value_of;

void TrustRegionConfig::validate() const {
  if (!(initial_lambda > 0.0)) throw InputError("initial damping must be > 0");
  if (!(lambda_increase > 1.0)) throw InputError("damping increase factor must be > 1");
  if (!(min_lambda_decrease > 0.0 && min_lambda_decrease < 1.0))
    throw InputError("damping decrease floor must be in (0, 1)");
  if (max_iterations < 0) throw InputError("max iterations must be >= 0");
  if (!(inner_tol > 0.0) || !(tight_inner_tol > 0.0)) throw InputError("inner tolerances must be > 0");
  if (!(weight_min > 0.0 && weight_min <= weight_max)) throw InputError("invalid IRLS weight cap");
}

const char* to_string(LmTermination t) {
  switch (t) {
    case LmTermination::empty: return "empty";
    case LmTermination::gradient: return "gradient";
    case LmTermination::relative_decrease: return "relative_decrease";
    case LmTermination::max_iterations: return "max_iterations";
    case LmTermination::damping_limit: return "damping_limit";
  }
  return "unknown";
}

namespace {

struct Frame {
  Vec3 d0, e1, e2;
};

Frame make_frame(const Vec3& d, int dim) {
  Frame f;
  f.d0 = d;
  if (dim == 2) {
    f.e1 = Vec3(-d.y(), d.x(), 0.0);
    f.e2 = Vec3::Zero();
    return f;
  }
  // Helper axis least aligned with d keeps the cross product well conditioned.
  Vec3 axis = Vec3::UnitX();
  if (std::abs(d.y()) < std::abs(d.x()) && std::abs(d.y()) <= std::abs(d.z())) axis = Vec3::UnitY();
  else if (std::abs(d.z()) < std::abs(d.x()) && std::abs(d.z()) < std::abs(d.y())) axis = Vec3::UnitZ();
  else if (std::abs(d.x()) <= std::abs(d.y()) && std::abs(d.x()) <= std::abs(d.z())) axis = Vec3::UnitX();
  f.e1 = d.cross(axis).normalized();
  f.e2 = d.cross(f.e1);
  return f;
}

template <class T>
V3<T> lift(const Vec3& v) {
  return {T(v.x()), T(v.y()), T(v.z())};
}

template <class T>
V3<T> axpy(const V3<T>& base, const Vec3& v, const T& s) {
  return {base.x + s * v.x(), base.y + s * v.y(), base.z + s * v.z()};
}

template <class T>
V3<T> rej(const V3<T>& a, const V3<T>& d, const V3<T>& p) {
  const V3<T> v = p - a;
  const T t = dot(v, d);
  return {v.x - t * d.x, v.y - t * d.y, v.z - t * d.z};
}

template <class T>
V3<T> proj(const V3<T>& a, const V3<T>& d, const V3<T>& p) {
  const T t = dot(p - a, d);
  return {a.x + t * d.x, a.y + t * d.y, a.z + t * d.z};
}

template <class T>
T component(const V3<T>& v, int k) {
  return k == 0 ? v.x : (k == 1 ? v.y : v.z);
}

}  // namespace

template <int D>
struct ResidualKernels {
  static constexpr int P = 2 * D - 1;

  template <class T>
  static void line(const TangentLine& l, const Frame& f, const T* x, V3<T>& a, V3<T>& d) {
    using std::cos;
    using std::sin;
    // Offsets are expressed in the frame so the along-line component is an exact gauge direction.
    if constexpr (D == 3) {
      a = {T(l.anchor.x()) + x[0] * f.d0.x() + x[1] * f.e1.x() + x[2] * f.e2.x(),
           T(l.anchor.y()) + x[0] * f.d0.y() + x[1] * f.e1.y() + x[2] * f.e2.y(),
           T(l.anchor.z()) + x[0] * f.d0.z() + x[1] * f.e1.z() + x[2] * f.e2.z()};
    } else {
      a = {T(l.anchor.x()) + x[0] * f.d0.x() + x[1] * f.e1.x(), T(l.anchor.y()) + x[0] * f.d0.y() + x[1] * f.e1.y(),
           T(l.anchor.z())};
    }
    const T ca = cos(x[D]), sa = sin(x[D]);
    if constexpr (D == 3) {
      const T cb = cos(x[D + 1]), sb = sin(x[D + 1]);
      const T u = ca * cb, v = sa * cb;
      d = {u * f.d0.x() + v * f.e1.x() + sb * f.e2.x(), u * f.d0.y() + v * f.e1.y() + sb * f.e2.y(),
           u * f.d0.z() + v * f.e1.z() + sb * f.e2.z()};
    } else {
      d = {ca * f.d0.x() + sa * f.e1.x(), ca * f.d0.y() + sa * f.e1.y(), T(0.0)};
    }
  }

  static int distance_rows(const ProblemSpec& spec) {
    return (spec.distance == DistanceMode::euclidean || spec.tau == 0.0) ? D : 1;
  }

  template <class T>
  static void pair(const ResidualSystem& S, std::size_t b, std::span<const TangentLine> L,
                   const std::vector<Frame>& F, const T* xa, const T* xb, T* out) {
    using std::sqrt;
    const auto& blk = S.pair_blocks_[b];
    V3<T> ai, di, aj, dj;
    line(L[blk.i], F[blk.li], xa, ai, di);
    line(L[blk.j], F[blk.lj], xb, aj, dj);
    const V3<T> ti = lift<T>(S.sites_->positions[blk.i]);
    const V3<T> tj = lift<T>(S.sites_->positions[blk.j]);
    const bool raw = S.spec_->raw_anchor_points;
    const V3<T> pi = raw ? ti : proj(ai, di, ti);
    const V3<T> pj = raw ? tj : proj(aj, dj, tj);
    const V3<T> c = pi - pj;
    const T chord2 = dot(c, c);
    const T den = value_of(chord2) > kChordClamp * kChordClamp ? sqrt(chord2) : T(kChordClamp);
    const V3<T> r1 = rej(ai, di, pj);
    const V3<T> r2 = rej(aj, dj, pi);
    const double s1 = std::sqrt(blk.coeff * S.w_forward_[b]);
    const double s2 = std::sqrt(blk.coeff * S.w_backward_[b]);
    for (int k = 0; k < D; ++k) {
      out[k] = component(r1, k) * s1 / den;
      out[D + k] = component(r2, k) * s2 / den;
    }
  }

  template <class T>
  static void distance(const ResidualSystem& S, std::size_t b, std::span<const TangentLine> L,
                       const std::vector<Frame>& F, const T* x, T* out) {
    using std::sqrt;
    const auto& blk = S.distance_blocks_[b];
    V3<T> a, d;
    line(L[blk.site], F[blk.local], x, a, d);
    const V3<T> r = rej(a, d, lift<T>(S.sites_->positions[blk.site]));
    const double s = std::sqrt(blk.coeff);
    if (distance_rows(*S.spec_) == D) {
      for (int k = 0; k < D; ++k) out[k] = component(r, k) * s;
      return;
    }
    const double tau = S.spec_->tau;
    const T d2 = dot(r, r);
    // Dead zone: value and derivative are exactly zero.
    if (value_of(d2) <= tau * tau) {
      out[0] = T(0.0);
      return;
    }
    out[0] = (sqrt(d2) - tau) * s;
  }

  template <class T>
  static void alignment(const ResidualSystem& S, std::size_t b, std::span<const TangentLine> L,
                        const std::vector<Frame>& F, const T* x, T* out) {
    const auto& blk = S.alignment_blocks_[b];
    V3<T> a, d;
    line(L[blk.site], F[blk.local], x, a, d);
    const V3<T> g = lift<T>(S.sites_->priors[blk.site]);
    const T t = dot(g, d);
    const V3<T> r = {g.x - t * d.x, g.y - t * d.y, g.z - t * d.z};
    const double s = std::sqrt(blk.coeff * S.w_align_[b]);
    for (int k = 0; k < D; ++k) out[k] = component(r, k) * s;
  }

  // Evaluates a block with dual numbers: fills residual (rows) and J (rows x cols).
  template <int C, class Fn>
  static void differentiate(const std::span<const double> xa, const std::span<const double> xb, int rows, Fn&& fn,
                            double* residual, double* J) {
    std::array<Jet<C>, C> x;
    for (int k = 0; k < P; ++k) x[k] = Jet<C>::variable(xa.empty() ? 0.0 : xa[k], k);
    if constexpr (C == 2 * P)
      for (int k = 0; k < P; ++k) x[P + k] = Jet<C>::variable(xb.empty() ? 0.0 : xb[k], P + k);
    std::array<Jet<C>, 2 * D> out;
    fn(x.data(), C == 2 * P ? x.data() + P : nullptr, out.data());
    for (int r = 0; r < rows; ++r) {
      residual[r] = out[r].a;
      for (int c = 0; c < C; ++c) J[r * C + c] = out[r].v[c];
    }
  }
};

namespace {

std::vector<Frame> frames_for(const std::vector<int>& active, std::span<const TangentLine> L, int dim) {
  std::vector<Frame> F(active.size());
  for (std::size_t k = 0; k < active.size(); ++k) F[k] = make_frame(L[active[k]].direction, dim);
  return F;
}

double clamp_weight(double num, double den, double lo, double hi) {
  if (!(den > 0.0)) return hi;
  return std::clamp(num / den, lo, hi);
}

}  // namespace

DirectedWeights abs_curvature_weights(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                                      std::span<const TangentLine> L, double epsilon, double weight_min,
                                      double weight_max) {
  const auto p = denoised_points(spec, sites, L);
  DirectedWeights w;
  w.forward.resize(graph.pair_count());
  w.backward.resize(graph.pair_count());
  for (std::size_t k = 0; k < graph.pair_count(); ++k) {
    const auto [i, j] = graph.pairs[k];
    const double chord = std::max((p[i] - p[j]).norm(), kChordClamp);
    w.forward[k] = clamp_weight(chord + epsilon, point_line_distance(L[i], p[j]) + epsilon, weight_min, weight_max);
    w.backward[k] = clamp_weight(chord + epsilon, point_line_distance(L[j], p[i]) + epsilon, weight_min, weight_max);
  }
  return w;
}

ResidualSystem::ResidualSystem(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                               std::span<const double> Q, const TrustRegionConfig& config)
    : spec_(&spec), sites_(&sites), graph_(&graph), config_(config) {
  spec.validate();
  sites.validate();
  const std::size_t n = sites.size();
  if (Q.size() != n) throw InputError("marginal vector size mismatch");
  if (static_cast<std::size_t>(graph.site_count) != n) throw InputError("graph/site count mismatch");

  local_of_site_.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (Q[i] > kMarginalCutoff) {
      local_of_site_[i] = static_cast<int>(active_.size());
      active_.push_back(static_cast<int>(i));
    }
  }
  for (std::size_t k = 0; k < graph.pair_count(); ++k) {
    const auto [i, j] = graph.pairs[k];
    const double qq = Q[i] * Q[j];
    if (!(qq > kMarginalCutoff)) continue;
    pair_blocks_.push_back({static_cast<int>(k), i, j, local_of_site_[i], local_of_site_[j], graph.weights[k] * qq});
  }
  for (int i : active_) {
    const double s = site_sigma(spec, sites, i);
    distance_blocks_.push_back({i, local_of_site_[i], Q[i] / (s * s)});
  }
  if (spec.beta > 0.0 && sites.has_priors())
    for (int i : active_) alignment_blocks_.push_back({i, local_of_site_[i], spec.beta * Q[i]});

  w_forward_.assign(pair_blocks_.size(), 1.0);
  w_backward_.assign(pair_blocks_.size(), 1.0);
  w_align_.assign(alignment_blocks_.size(), 1.0);
}

bool ResidualSystem::reweighted() const {
  return spec_->curvature.kind == CurvatureKind::absolute ||
         (spec_->alignment_power == 1 && !alignment_blocks_.empty());
}

void ResidualSystem::update_weights(std::span<const TangentLine> L) {
  if (spec_->curvature.kind == CurvatureKind::absolute) {
    const double eps = spec_->curvature.epsilon;
    for (std::size_t b = 0; b < pair_blocks_.size(); ++b) {
      const auto& blk = pair_blocks_[b];
      const Vec3 pi = denoised_point(*spec_, L[blk.i], sites_->positions[blk.i]);
      const Vec3 pj = denoised_point(*spec_, L[blk.j], sites_->positions[blk.j]);
      const double chord = std::max((pi - pj).norm(), kChordClamp);
      w_forward_[b] = clamp_weight(chord + eps, point_line_distance(L[blk.i], pj) + eps, config_.weight_min,
                                   config_.weight_max);
      w_backward_[b] = clamp_weight(chord + eps, point_line_distance(L[blk.j], pi) + eps, config_.weight_min,
                                    config_.weight_max);
    }
  }
  if (spec_->alignment_power == 1) {
    for (std::size_t b = 0; b < alignment_blocks_.size(); ++b) {
      const int i = alignment_blocks_[b].site;
      w_align_[b] = clamp_weight(1.0, misalignment(L[i], sites_->priors[i]), config_.weight_min, config_.weight_max);
    }
  }
}

std::vector<double> ResidualSystem::residuals(std::span<const TangentLine> L, std::span<const double> delta) const {
  if (!delta.empty() && delta.size() != static_cast<std::size_t>(parameter_count()))
    throw InputError("parameter vector size mismatch");
  const int P = params_per_site();
  const auto F = frames_for(active_, L, dim());
  const std::vector<double> zero(static_cast<std::size_t>(P), 0.0);
  auto params = [&](int local) -> const double* {
    return delta.empty() ? zero.data() : delta.data() + static_cast<std::size_t>(local) * P;
  };
  std::vector<double> r;
  auto run = [&]<int D>() {
    using K = ResidualKernels<D>;
    double buf[2 * D];
    for (std::size_t b = 0; b < pair_blocks_.size(); ++b) {
      K::pair(*this, b, L, F, params(pair_blocks_[b].li), params(pair_blocks_[b].lj), buf);
      r.insert(r.end(), buf, buf + 2 * D);
    }
    const int drows = K::distance_rows(*spec_);
    for (std::size_t b = 0; b < distance_blocks_.size(); ++b) {
      K::distance(*this, b, L, F, params(distance_blocks_[b].local), buf);
      r.insert(r.end(), buf, buf + drows);
    }
    for (std::size_t b = 0; b < alignment_blocks_.size(); ++b) {
      K::alignment(*this, b, L, F, params(alignment_blocks_[b].local), buf);
      r.insert(r.end(), buf, buf + D);
    }
  };
  if (dim() == 2) run.template operator()<2>();
  else run.template operator()<3>();
  return r;
}

double ResidualSystem::objective(std::span<const TangentLine> L) const {
  double f = 0.0;
  for (double v : residuals(L)) f += v * v;
  return f;
}

double ResidualSystem::energy_objective(std::span<const TangentLine> L) const {
  double pairs = 0.0;
  for (const auto& blk : pair_blocks_) {
    const Vec3 pi = denoised_point(*spec_, L[blk.i], sites_->positions[blk.i]);
    const Vec3 pj = denoised_point(*spec_, L[blk.j], sites_->positions[blk.j]);
    pairs += blk.coeff * curvature_pair(L[blk.i], L[blk.j], pi, pj, spec_->curvature.kind);
  }
  double sites = 0.0;
  for (const auto& blk : distance_blocks_) {
    const double d = soft_distance(*spec_, L[blk.site], sites_->positions[blk.site]);
    sites += blk.coeff * d * d;
  }
  for (const auto& blk : alignment_blocks_) {
    const double m = misalignment(L[blk.site], sites_->priors[blk.site]);
    sites += blk.coeff * (spec_->alignment_power == 2 ? m * m : m);
  }
  return pairs + sites;
}

std::vector<JacobianBlock> ResidualSystem::jacobian(std::span<const TangentLine> L) const {
  const int P = params_per_site();
  const auto F = frames_for(active_, L, dim());
  std::vector<JacobianBlock> out;
  auto run = [&]<int D>() {
    using K = ResidualKernels<D>;
    constexpr int PP = K::P;
    for (std::size_t b = 0; b < pair_blocks_.size(); ++b) {
      JacobianBlock jb{ResidualKind::curvature, pair_blocks_[b].pair, pair_blocks_[b].i, pair_blocks_[b].j,
                       2 * D, 2 * P, std::vector<double>(2 * D), std::vector<double>(2 * D * 2 * P)};
      K::template differentiate<2 * PP>({}, {}, 2 * D,
                                        [&](const auto* xa, const auto* xb, auto* o) { K::pair(*this, b, L, F, xa, xb, o); },
                                        jb.residual.data(), jb.values.data());
      out.push_back(std::move(jb));
    }
    const int drows = K::distance_rows(*spec_);
    for (std::size_t b = 0; b < distance_blocks_.size(); ++b) {
      JacobianBlock jb{ResidualKind::distance, distance_blocks_[b].site, distance_blocks_[b].site, -1,
                       drows, P, std::vector<double>(drows), std::vector<double>(drows * P)};
      K::template differentiate<PP>({}, {}, drows,
                                    [&](const auto* x, const auto*, auto* o) { K::distance(*this, b, L, F, x, o); },
                                    jb.residual.data(), jb.values.data());
      out.push_back(std::move(jb));
    }
    for (std::size_t b = 0; b < alignment_blocks_.size(); ++b) {
      JacobianBlock jb{ResidualKind::alignment, alignment_blocks_[b].site, alignment_blocks_[b].site, -1,
                       D, P, std::vector<double>(D), std::vector<double>(D * P)};
      K::template differentiate<PP>({}, {}, D,
                                    [&](const auto* x, const auto*, auto* o) { K::alignment(*this, b, L, F, x, o); },
                                    jb.residual.data(), jb.values.data());
      out.push_back(std::move(jb));
    }
  };
  if (dim() == 2) run.template operator()<2>();
  else run.template operator()<3>();
  return out;
}

ResidualSystem::NormalEquations ResidualSystem::normal_equations(std::span<const TangentLine> L) const {
  const int P = params_per_site();
  const std::size_t PP = static_cast<std::size_t>(P) * P;
  const auto F = frames_for(active_, L, dim());
  NormalEquations ne;
  ne.gradient.assign(static_cast<std::size_t>(parameter_count()), 0.0);
  ne.diag.assign(active_.size() * PP, 0.0);
  ne.offdiag.assign(pair_blocks_.size() * PP, 0.0);
  ne.offdiag_sites.resize(pair_blocks_.size());
  for (std::size_t b = 0; b < pair_blocks_.size(); ++b)
    ne.offdiag_sites[b] = {pair_blocks_[b].li, pair_blocks_[b].lj};

  // Accumulates one block: J is rows x cols with cols = P (site a) or 2P (a, b).
  auto accumulate = [&](int rows, int cols, const double* r, const double* J, int la, int lb, std::size_t off) {
    for (int row = 0; row < rows; ++row) ne.objective += r[row] * r[row];
    double* ga = ne.gradient.data() + static_cast<std::size_t>(la) * P;
    double* Haa = ne.diag.data() + static_cast<std::size_t>(la) * PP;
    for (int row = 0; row < rows; ++row) {
      const double* Jr = J + row * cols;
      for (int c = 0; c < P; ++c) {
        ga[c] += Jr[c] * r[row];
        for (int d = 0; d < P; ++d) Haa[c * P + d] += Jr[c] * Jr[d];
      }
    }
    if (cols == P) return;
    double* gb = ne.gradient.data() + static_cast<std::size_t>(lb) * P;
    double* Hbb = ne.diag.data() + static_cast<std::size_t>(lb) * PP;
    double* Hab = ne.offdiag.data() + off * PP;
    for (int row = 0; row < rows; ++row) {
      const double* Jr = J + row * cols;
      for (int c = 0; c < P; ++c) {
        gb[c] += Jr[P + c] * r[row];
        for (int d = 0; d < P; ++d) {
          Hbb[c * P + d] += Jr[P + c] * Jr[P + d];
          Hab[c * P + d] += Jr[c] * Jr[P + d];
        }
      }
    }
  };

  constexpr std::size_t kChunk = 8192;
  auto run = [&]<int D>() {
    using K = ResidualKernels<D>;
    constexpr int PK = K::P;
    constexpr int RP = 2 * D, CP = 2 * PK;
    std::vector<double> rbuf(kChunk * RP), jbuf(kChunk * RP * CP);
    for (std::size_t start = 0; start < pair_blocks_.size(); start += kChunk) {
      const std::size_t count = std::min(kChunk, pair_blocks_.size() - start);
      parallel_for(count, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t t = lo; t < hi; ++t) {
          const std::size_t b = start + t;
          K::template differentiate<CP>({}, {}, RP,
                                        [&](const auto* xa, const auto* xb, auto* o) { K::pair(*this, b, L, F, xa, xb, o); },
                                        rbuf.data() + t * RP, jbuf.data() + t * RP * CP);
        }
      });
      for (std::size_t t = 0; t < count; ++t) {
        const auto& blk = pair_blocks_[start + t];
        accumulate(RP, CP, rbuf.data() + t * RP, jbuf.data() + t * RP * CP, blk.li, blk.lj, start + t);
      }
    }
    const int drows = K::distance_rows(*spec_);
    for (std::size_t start = 0; start < distance_blocks_.size(); start += kChunk) {
      const std::size_t count = std::min(kChunk, distance_blocks_.size() - start);
      parallel_for(count, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t t = lo; t < hi; ++t) {
          const std::size_t b = start + t;
          K::template differentiate<PK>({}, {}, drows,
                                        [&](const auto* x, const auto*, auto* o) { K::distance(*this, b, L, F, x, o); },
                                        rbuf.data() + t * RP, jbuf.data() + t * RP * CP);
        }
      });
      for (std::size_t t = 0; t < count; ++t)
        accumulate(drows, PK, rbuf.data() + t * RP, jbuf.data() + t * RP * CP, distance_blocks_[start + t].local, -1, 0);
    }
    for (std::size_t start = 0; start < alignment_blocks_.size(); start += kChunk) {
      const std::size_t count = std::min(kChunk, alignment_blocks_.size() - start);
      parallel_for(count, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t t = lo; t < hi; ++t) {
          const std::size_t b = start + t;
          K::template differentiate<PK>({}, {}, D,
                                        [&](const auto* x, const auto*, auto* o) { K::alignment(*this, b, L, F, x, o); },
                                        rbuf.data() + t * RP, jbuf.data() + t * RP * CP);
        }
      });
      for (std::size_t t = 0; t < count; ++t)
        accumulate(D, PK, rbuf.data() + t * RP, jbuf.data() + t * RP * CP, alignment_blocks_[start + t].local, -1, 0);
    }
  };
  if (dim() == 2) run.template operator()<2>();
  else run.template operator()<3>();
  return ne;
}

std::string ResidualSystem::find_nonfinite_block(std::span<const TangentLine> L) const {
  const auto F = frames_for(active_, L, dim());
  const int P = params_per_site();
  const std::vector<double> zero(static_cast<std::size_t>(P), 0.0);
  std::ostringstream os;
  auto bad = [](const double* v, int n) {
    for (int k = 0; k < n; ++k)
      if (!std::isfinite(v[k])) return true;
    return false;
  };
  auto run = [&]<int D>() -> bool {
    using K = ResidualKernels<D>;
    double buf[2 * D];
    for (std::size_t b = 0; b < pair_blocks_.size(); ++b) {
      K::pair(*this, b, L, F, zero.data(), zero.data(), buf);
      if (bad(buf, 2 * D)) {
        os << "curvature block " << b << " (sites " << pair_blocks_[b].i << ", " << pair_blocks_[b].j << ")";
        return true;
      }
    }
    for (std::size_t b = 0; b < distance_blocks_.size(); ++b) {
      K::distance(*this, b, L, F, zero.data(), buf);
      if (bad(buf, K::distance_rows(*spec_))) {
        os << "distance block " << b << " (site " << distance_blocks_[b].site << ")";
        return true;
      }
    }
    for (std::size_t b = 0; b < alignment_blocks_.size(); ++b) {
      K::alignment(*this, b, L, F, zero.data(), buf);
      if (bad(buf, D)) {
        os << "alignment block " << b << " (site " << alignment_blocks_[b].site << ")";
        return true;
      }
    }
    return false;
  };
  if (dim() == 2) run.template operator()<2>();
  else run.template operator()<3>();
  return os.str();
}

Tangents ResidualSystem::apply_step(std::span<const TangentLine> L, std::span<const double> delta) const {
  const int P = params_per_site();
  Tangents out(L.begin(), L.end());
  const auto F = frames_for(active_, L, dim());
  for (std::size_t k = 0; k < active_.size(); ++k) {
    const int i = active_[k];
    const double* x = delta.data() + k * P;
    V3<double> a, d;
    if (dim() == 2) ResidualKernels<2>::line(L[i], F[k], x, a, d);
    else ResidualKernels<3>::line(L[i], F[k], x, a, d);
    TangentLine nl = TangentLine::make(Vec3(a.x, a.y, a.z), Vec3(d.x, d.y, d.z));
    nl.anchor = project_onto_line(nl, sites_->positions[i]);
    out[i] = nl;
  }
  return out;
}

namespace {

struct PcgResult {
  std::vector<double> x;
  int iterations = 0;
  bool ok = true;
};

// Solves (H + lambda diag(D)) x = -g with block-Jacobi preconditioned CG.
template <int P>
PcgResult pcg_fixed(const ResidualSystem::NormalEquations& ne, const std::vector<double>& D, double lambda,
                    double tol, int max_iter) {
  constexpr std::size_t PP = static_cast<std::size_t>(P) * P;
  const std::size_t n = ne.gradient.size();
  const std::size_t sites = n / P;
  PcgResult res;
  res.x.assign(n, 0.0);

  using Mat = Eigen::Matrix<double, P, P, Eigen::RowMajor>;
  std::vector<double> Minv(sites * PP);
  for (std::size_t s = 0; s < sites; ++s) {
    Mat A = Eigen::Map<const Mat>(ne.diag.data() + s * PP);
    for (int c = 0; c < P; ++c) A(c, c) += lambda * D[s * P + c];
    Eigen::LLT<Mat> llt(A);
    if (llt.info() != Eigen::Success) {
      res.ok = false;
      return res;
    }
    Eigen::Map<Mat>(Minv.data() + s * PP) = llt.solve(Mat::Identity());
  }

  auto apply_A = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t s = 0; s < sites; ++s) {
      const double* H = ne.diag.data() + s * PP;
      for (int c = 0; c < P; ++c) {
        double acc = lambda * D[s * P + c] * v[s * P + c];
        for (int d = 0; d < P; ++d) acc += H[c * P + d] * v[s * P + d];
        out[s * P + c] = acc;
      }
    }
    for (std::size_t b = 0; b < ne.offdiag_sites.size(); ++b) {
      const auto [la, lb] = ne.offdiag_sites[b];
      const double* H = ne.offdiag.data() + b * PP;
      const double* va = v.data() + static_cast<std::size_t>(la) * P;
      const double* vb = v.data() + static_cast<std::size_t>(lb) * P;
      double* oa = out.data() + static_cast<std::size_t>(la) * P;
      double* ob = out.data() + static_cast<std::size_t>(lb) * P;
      for (int c = 0; c < P; ++c) {
        double acc = 0.0;
        for (int d = 0; d < P; ++d) {
          acc += H[c * P + d] * vb[d];
          ob[d] += H[c * P + d] * va[c];
        }
        oa[c] += acc;
      }
    }
  };
  auto apply_M = [&](const std::vector<double>& r, std::vector<double>& z) {
    for (std::size_t s = 0; s < sites; ++s) {
      const double* M = Minv.data() + s * PP;
      for (int c = 0; c < P; ++c) {
        double acc = 0.0;
        for (int d = 0; d < P; ++d) acc += M[c * P + d] * r[s * P + d];
        z[s * P + c] = acc;
      }
    }
  };
  auto dotv = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  };

  std::vector<double> r(n), z(n), p(n), Ap(n);
  for (std::size_t k = 0; k < n; ++k) r[k] = -ne.gradient[k];
  const double r0 = std::sqrt(dotv(r, r));
  if (r0 == 0.0) return res;
  apply_M(r, z);
  p = z;
  double rz = dotv(r, z);
  for (int it = 0; it < max_iter; ++it) {
    apply_A(p, Ap);
    const double pAp = dotv(p, Ap);
    if (!(pAp > 0.0) || !std::isfinite(pAp)) {
      res.ok = false;
      return res;
    }
    const double alpha = rz / pAp;
    double rr = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      res.x[k] += alpha * p[k];
      r[k] -= alpha * Ap[k];
      rr += r[k] * r[k];
    }
    res.iterations = it + 1;
    if (std::sqrt(rr) <= tol * r0) break;
    apply_M(r, z);
    const double rz_next = dotv(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
  }
  return res;
}

PcgResult pcg(const ResidualSystem::NormalEquations& ne, const std::vector<double>& D, double lambda, int P,
              double tol, int max_iter) {
  switch (P) {
    case 3: return pcg_fixed<3>(ne, D, lambda, tol, max_iter);
    case 5: return pcg_fixed<5>(ne, D, lambda, tol, max_iter);
    default: throw Error(ErrorCode::internal, "unsupported parameter block size");
  }
}

double quadratic_form(const ResidualSystem::NormalEquations& ne, const std::vector<double>& x, int P) {
  const std::size_t PP = static_cast<std::size_t>(P) * P;
  const std::size_t sites = x.size() / P;
  double q = 0.0;
  for (std::size_t s = 0; s < sites; ++s) {
    const double* H = ne.diag.data() + s * PP;
    for (int c = 0; c < P; ++c)
      for (int d = 0; d < P; ++d) q += x[s * P + c] * H[c * P + d] * x[s * P + d];
  }
  for (std::size_t b = 0; b < ne.offdiag_sites.size(); ++b) {
    const auto [la, lb] = ne.offdiag_sites[b];
    const double* H = ne.offdiag.data() + b * PP;
    for (int c = 0; c < P; ++c)
      for (int d = 0; d < P; ++d) q += 2.0 * x[la * P + c] * H[c * P + d] * x[lb * P + d];
  }
  return q;
}

}  // namespace

LmResult lm_solve(ResidualSystem& system, std::span<const TangentLine> L0, const TrustRegionConfig& config) {
  config.validate();
  LmResult res;
  res.L.assign(L0.begin(), L0.end());
  system.update_weights(res.L);
  res.initial_objective = system.energy_objective(res.L);
  res.final_objective = res.initial_objective;
  if (system.empty()) return res;

  const int P = system.params_per_site();
  auto ne = system.normal_equations(res.L);
  if (!std::isfinite(ne.objective)) throw NumericalError("non-finite residual in " + system.find_nonfinite_block(res.L));
  double surrogate = ne.objective;
  double energy = system.reweighted() ? system.energy_objective(res.L) : surrogate;
  double lambda = config.initial_lambda;
  bool tight = false;
  int retries = 0;
  res.termination = LmTermination::max_iterations;

  for (int it = 0; it < config.max_iterations; ++it) {
    LmIterationStats st;
    st.iter = it;
    st.lambda_lm = lambda;
    double gnorm = 0.0;
    for (double g : ne.gradient) gnorm = std::max(gnorm, std::abs(g));
    st.grad_norm = gnorm;
    st.objective = energy;
    if (gnorm < config.gradient_tol) {
      res.termination = LmTermination::gradient;
      res.stats.push_back(st);
      break;
    }

    std::vector<double> D(ne.gradient.size());
    const std::size_t PP = static_cast<std::size_t>(P) * P;
    for (std::size_t k = 0; k < D.size(); ++k) {
      const std::size_t s = k / P, c = k % P;
      D[k] = std::clamp(ne.diag[s * PP + c * P + c], 1e-6, 1e32);
    }
    const auto cg = pcg(ne, D, lambda, P, tight ? config.tight_inner_tol : config.inner_tol, config.max_cg_iterations);
    st.cg_iters = cg.iterations;
    if (!cg.ok) {
      if (++retries > config.max_cg_retries) {
        std::ostringstream os;
        os << "conjugate gradient breakdown after " << retries - 1 << " damping increases (lambda=" << lambda << ")";
        throw NumericalError(os.str());
      }
      lambda *= config.lambda_increase;
      res.stats.push_back(st);
      continue;
    }

    double gd = 0.0;
    for (std::size_t k = 0; k < cg.x.size(); ++k) gd += ne.gradient[k] * cg.x[k];
    const double predicted = -(2.0 * gd + quadratic_form(ne, cg.x, P));

    bool accepted = false;
    if (predicted > 0.0) {
      Tangents trial = system.apply_step(res.L, cg.x);
      const double trial_surrogate = system.objective(trial);
      if (!std::isfinite(trial_surrogate))
        throw NumericalError("non-finite residual in " + system.find_nonfinite_block(trial));
      const double trial_energy = system.reweighted() ? system.energy_objective(trial) : trial_surrogate;
      const double rho = (surrogate - trial_surrogate) / predicted;
      st.rho = rho;
      if (rho > 0.0 && trial_energy < energy) {
        accepted = true;
        const double rel = (energy - trial_energy) / std::max(std::abs(energy), 1e-300);
        res.L = std::move(trial);
        system.update_weights(res.L);
        ne = system.normal_equations(res.L);
        surrogate = ne.objective;
        energy = system.reweighted() ? trial_energy : surrogate;
        const double t = 2.0 * rho - 1.0;
        lambda *= std::max(config.min_lambda_decrease, 1.0 - t * t * t);
        ++res.accepted_steps;
        tight = rel < 1e-4;
        st.accepted = true;
        st.objective = energy;
        if (rel < config.relative_decrease_tol) {
          res.stats.push_back(st);
          res.termination = LmTermination::relative_decrease;
          break;
        }
      }
    }
    if (!accepted) {
      lambda *= config.lambda_increase;
      if (lambda > config.max_lambda) {
        res.stats.push_back(st);
        res.termination = LmTermination::damping_limit;
        break;
      }
    }
    res.stats.push_back(st);
  }
  res.final_objective = system.reweighted() ? energy : system.energy_objective(res.L);
  return res;
}

LmResult lm_solve(const ProblemSpec& spec, const SiteSet& sites, const NeighborGraph& graph,
                  std::span<const TangentLine> L0, std::span<const double> Q, const TrustRegionConfig& config) {
  ResidualSystem system(spec, sites, graph, Q, config);
  return lm_solve(system, L0, config);
}

}  // namespace thinstruct
