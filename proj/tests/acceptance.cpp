// Acceptance run: one PASS/FAIL line per criterion, with timings.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "support.hpp"
#include "thinstruct/bcd.hpp"
#include "thinstruct/energy.hpp"
#include "thinstruct/inference.hpp"
#include "thinstruct/pipelines.hpp"
#include "thinstruct/solver.hpp"
#include "thinstruct/synth.hpp"

using namespace thinstruct;
using tstest::kPi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  // a literal reading that cannot hold for this model; reported, not fatal
  bool documented = false;
};

int g_failures = 0;

void run(int id, const char* name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const char* tag = o.pass ? "PASS" : (o.documented ? "FAIL (documented)" : "FAIL");
  std::printf("[%2d] %-17s %-34s %8.2fs  %s\n", id, tag, name, secs, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass && !o.documented) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

SiteSet curve_sites(const std::vector<Vec3>& pts) {
  SiteSet s;
  s.dim = 2;
  s.positions = pts;
  s.lambdas.assign(pts.size(), 0.0);
  return s;
}

// Sum of the pair term over a closed chain with the given tangents.
double chain_sum(const std::vector<Vec3>& pts, const std::vector<Vec3>& dirs, CurvatureKind kind,
                 std::vector<double>* per_pair = nullptr) {
  double sum = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    const double v = curvature_pair(TangentLine::make(pts[i], dirs[i]), TangentLine::make(pts[j], dirs[j]), pts[i],
                                    pts[j], kind);
    if (per_pair) per_pair->push_back(v);
    sum += v;
  }
  return sum;
}

double max_pair_curvature(const SiteSet& sites, const NeighborGraph& g, const Tangents& L) {
  const auto spec = ProblemSpec::point_cloud();
  const auto p = denoised_points(spec, sites, L);
  double m = 0.0;
  for (std::size_t k = 0; k < g.pairs.size(); ++k) {
    const auto [i, j] = g.pairs[k];
    m = std::max(m, curvature_pair(L[i], L[j], p[i], p[j], CurvatureKind::absolute));
  }
  return m;
}

bool accepted_steps_decrease(const LmResult& r, int* violations = nullptr) {
  int bad = 0;
  double prev = r.initial_objective;
  for (const auto& s : r.stats) {
    if (!s.accepted) continue;
    if (s.objective > prev + 1e-10) ++bad;
    prev = s.objective;
  }
  if (violations) *violations += bad;
  return bad == 0;
}

// Dense Jacobian rows of one residual kind against central differences.
struct FdCheck {
  int checked = 0;
  int bad = 0;
  double worst = 0.0;
};

void fd_check(const ResidualSystem& S, const Tangents& L, ResidualKind kind, FdCheck& out) {
  const int P = S.params_per_site(), n = S.parameter_count();
  std::vector<int> local(L.size(), -1);
  for (std::size_t k = 0; k < S.active_sites().size(); ++k) local[S.active_sites()[k]] = static_cast<int>(k);
  const auto blocks = S.jacobian(L);
  // residual offset of each block in build order
  std::vector<int> offset;
  int rows = 0;
  for (const auto& b : blocks) {
    offset.push_back(rows);
    rows += b.rows;
  }
  const double h = 1e-6;
  std::vector<double> delta(n, 0.0);
  std::vector<std::vector<double>> fd(n);
  for (int c = 0; c < n; ++c) {
    delta[c] = h;
    const auto rp = S.residuals(L, delta);
    delta[c] = -h;
    const auto rm = S.residuals(L, delta);
    delta[c] = 0.0;
    fd[c].resize(rows);
    for (int r = 0; r < rows; ++r) fd[c][r] = (rp[r] - rm[r]) / (2 * h);
  }
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& b = blocks[bi];
    if (b.kind != kind) continue;
    ++out.checked;
    for (int r = 0; r < b.rows; ++r) {
      std::vector<double> line(n, 0.0);
      for (int c = 0; c < b.cols; ++c) {
        const int site = c < P ? b.site_a : b.site_b;
        line[local[site] * P + c % P] = b.values[r * b.cols + c];
      }
      for (int c = 0; c < n; ++c) {
        const double ref = fd[c][offset[bi] + r];
        const double err = std::abs(line[c] - ref);
        out.worst = std::max(out.worst, err / (1e-8 + 1e-5 * std::abs(ref)));
        if (err > 1e-8 + 1e-5 * std::abs(ref)) ++out.bad;
      }
    }
  }
}

struct Random3 {
  SiteSet sites;
  NeighborGraph graph;
  Tangents L;
  std::vector<double> Q;
};

Random3 random_system(std::mt19937_64& rng, int dim, int n) {
  std::uniform_real_distribution<double> box(0.0, 5.0), off(-1.0, 1.0), coin(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  Random3 r;
  r.sites.dim = dim;
  const auto z = [&](double v) { return dim == 3 ? v : 0.0; };
  for (int i = 0; i < n; ++i) {
    r.sites.positions.emplace_back(box(rng), box(rng), z(box(rng)));
    r.sites.lambdas.push_back(0.0);
    r.sites.priors.emplace_back(g(rng), g(rng), z(g(rng)));
    r.sites.scales.push_back(0.5 + coin(rng));
    r.L.push_back(TangentLine::make(r.sites.positions.back() + Vec3(off(rng), off(rng), z(off(rng))),
                                    Vec3(g(rng), g(rng), z(g(rng)))));
    r.Q.push_back(0.05 + 0.95 * coin(rng));
  }
  std::vector<NeighborPair> pairs;
  std::vector<double> w;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      pairs.push_back({i, j});
      w.push_back(0.5 + coin(rng));
    }
  r.graph = NeighborGraph::from_pairs(n, std::move(pairs), std::move(w));
  return r;
}

// Sites with x = 1 reachable from `from` through the graph.
bool connected(const NeighborGraph& g, const Labeling& x, const std::vector<int>& from, const std::vector<int>& to) {
  std::vector<int> stack;
  std::vector<char> seen(x.size(), 0);
  for (int s : from)
    if (x[s]) {
      stack.push_back(s);
      seen[s] = 1;
    }
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    for (const auto& nb : g.neighbors[s])
      if (x[nb.site] && !seen[nb.site]) {
        seen[nb.site] = 1;
        stack.push_back(nb.site);
      }
  }
  for (int t : to)
    if (seen[t]) return true;
  return false;
}

Labeling round_half(const std::vector<double>& Q) {
  Labeling x(Q.size());
  for (std::size_t i = 0; i < Q.size(); ++i) x[i] = Q[i] >= 0.5;
  return x;
}

int run_cli(const std::string& args, std::string* out = nullptr) {
  const std::string cmd = std::string(TS_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return -1;
  char buf[4096];
  std::string text;
  while (std::fgets(buf, sizeof buf, p)) text += buf;
  const int status = pclose(p);
  if (out) *out = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

double mean_angle_error(const std::vector<Vec3>& truth, const Tangents& L, const std::vector<std::size_t>& ids) {
  double s = 0.0;
  for (auto i : ids) s += tstest::angle_deg(L[i].direction, truth[i]);
  return ids.empty() ? std::numeric_limits<double>::infinity() : s / static_cast<double>(ids.size());
}

// Descent bookkeeping shared by criterion 5.
struct Descent {
  int instances = 0;
  int sweeps = 0, lm_steps = 0;
  int energy_violations = 0;  // expected energy went up across a sweep
  int lm_violations = 0;      // an accepted LM step did not lower the energy
  int free_violations = 0;    // expected energy - entropy went up
  double worst_energy_rise = 0.0;

  void add_mean_field(const MeanFieldResult& r) {
    for (std::size_t k = 1; k < r.expected_energy.size(); ++k) {
      ++sweeps;
      const double rise = r.expected_energy[k] - r.expected_energy[k - 1];
      if (rise > 1e-10) ++energy_violations;
      worst_energy_rise = std::max(worst_energy_rise, rise);
      if (r.free_energy[k] > r.free_energy[k - 1] + 1e-10) ++free_violations;
    }
  }
  void add_lm(const LmResult& r) {
    for (const auto& s : r.stats) lm_steps += s.accepted;
    accepted_steps_decrease(r, &lm_violations);
  }
};

}  // namespace

int main() {
  std::printf("thinstruct acceptance\n");

  run(1, "circle curvature sums", [] {
    double worst = 0.0, sum256 = 0.0;
    for (int M : {8, 32, 256}) {
      const auto c = synth::circle(7.5, M);
      const double s = chain_sum(c.points, c.tangents, CurvatureKind::absolute);
      worst = std::max(worst, std::abs(s - 2 * M * std::sin(kPi / M)));
      if (M == 256) sum256 = s;
    }
    return Outcome{worst < 1e-9 && std::abs(sum256 - 2 * kPi) < 0.01,
                   fmt("max |sum - 2M sin(pi/M)| = %.2e, |sum256 - 2pi| = %.2e", worst, std::abs(sum256 - 2 * kPi))};
  });

  run(2, "square corners", [] {
    const auto sq = synth::square(10.0, 6);
    std::vector<double> per;
    const double total = chain_sum(sq.points, sq.tangents, CurvatureKind::absolute, &per);
    double corner_err = 0.0;
    int corners = 0;
    for (double v : per)
      if (v > 1e-12) {
        ++corners;
        corner_err = std::max(corner_err, std::abs(v - std::sqrt(2.0)));
      }
    return Outcome{corners == 4 && corner_err < 1e-9 && total < 2 * kPi,
                   fmt("%d corner pairs, max |v - sqrt2| = %.2e, total = %.6f < 2pi", corners, corner_err, total)};
  });

  run(3, "abs vs squared on rounded square", [] {
    const auto c = synth::rounded_square(40.0, 4.0, 120, 0.3, 3);
    PointCloudParams pa, ps;
    pa.curvature.kind = CurvatureKind::absolute;
    ps.curvature.kind = CurvatureKind::squared;
    const auto ra = fit_point_cloud(c.points, 2, pa);
    const auto rs = fit_point_cloud(c.points, 2, ps);
    const double ma = max_pair_curvature(ra.sites, ra.graph, ra.fit.L);
    const double ms = max_pair_curvature(rs.sites, rs.graph, rs.fit.L);
    // the absolute run is IRLS: each step is monotone in its own weighted objective
    const bool mono = accepted_steps_decrease(ra.fit) && accepted_steps_decrease(rs.fit);
    const bool lowered = ra.fit.final_objective < ra.fit.initial_objective &&
                         rs.fit.final_objective < rs.fit.initial_objective;
    return Outcome{ma > ms && mono && lowered,
                   fmt("max pair curvature abs %.4f vs squared %.4f, monotone=%d, energies %.3f->%.3f, %.3f->%.3f", ma,
                       ms, mono, ra.fit.initial_objective, ra.fit.final_objective, rs.fit.initial_objective,
                       rs.fit.final_objective)};
  });

  run(4, "Jacobians vs finite differences", [] {
    std::mt19937_64 rng(404);
    FdCheck curv, dist, align;
    int configs = 0;
    for (; configs < 100; ++configs) {
      const int dim = configs % 2 ? 3 : 2;
      auto r = random_system(rng, dim, 2 + configs % 3);
      ProblemSpec spec = ProblemSpec::vessels();
      spec.curvature.kind = configs % 4 < 2 ? CurvatureKind::squared : CurvatureKind::absolute;
      spec.alignment_power = configs % 5 == 0 ? 1 : 2;
      ResidualSystem S(spec, r.sites, r.graph, r.Q);
      fd_check(S, r.L, ResidualKind::curvature, curv);
      fd_check(S, r.L, ResidualKind::distance, dist);
      fd_check(S, r.L, ResidualKind::alignment, align);
    }
    const bool ok = curv.checked >= 100 && dist.checked >= 100 && align.checked >= 100 && curv.bad + dist.bad +
                                                                                                align.bad ==
                                                                                            0;
    return Outcome{ok, fmt("blocks curvature/distance/alignment = %d/%d/%d, mismatches %d, worst err/tol %.3f",
                           curv.checked, dist.checked, align.checked, curv.bad + dist.bad + align.bad,
                           std::max({curv.worst, dist.worst, align.worst}))};
  });

  run(5, "descent invariants", [] {
    Descent d;
    std::mt19937_64 rng(505);
    for (int t = 0; t < 20; ++t, ++d.instances) {
      auto inst = tstest::random_instance(rng, 10, 0.5, -2.0, 1.0);
      const auto spec = ProblemSpec::edges();
      std::vector<double> Q0(10);
      for (auto& q : Q0) q = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      d.add_mean_field(run_mean_field(spec, inst.sites, inst.graph, inst.L, Q0));
      d.add_lm(lm_solve(spec, inst.sites, inst.graph, inst.L, Q0));
    }
    {
      const auto g = synth::gap_instance();
      const auto spec = ProblemSpec::edges();
      const std::vector<double> Q0 = init_marginals(spec, g.sites, g.L0);
      d.add_mean_field(run_mean_field(spec, g.sites, g.graph, g.L0, Q0));
      d.add_lm(lm_solve(spec, g.sites, g.graph, g.L0, Q0));
      ++d.instances;
    }
    {
      const auto c = synth::circle(15.0, 48, 0.3, 5);
      PointCloudParams pp;
      d.add_lm(fit_point_cloud(c.points, 2, pp).fit);
      ++d.instances;
    }
    const bool bound_ok = d.free_violations == 0 && d.lm_violations == 0;
    Outcome o{d.energy_violations == 0 && bound_ok,
              fmt("%d instances: %d LM steps, %d rises; %d sweeps, expected-energy rises %d (worst %.3g), "
                  "free-energy rises %d",
                  d.instances, d.lm_steps, d.lm_violations, d.sweeps, d.energy_violations, d.worst_energy_rise,
                  d.free_violations)};
    // A coordinate update minimizes energy minus entropy, so the expected
    // energy alone can rise. Only the mean-field part is allowed this.
    o.documented = !o.pass && bound_ok;
    return o;
  });

  run(6, "two-site mean-field fixed point", [] {
    // oracle: scalar iteration of q = sigmoid(1 + 0.25 q)
    double oracle = 0.5;
    for (int k = 0; k < 200; ++k) oracle = 1.0 / (1.0 + std::exp(-(1.0 + 0.25 * oracle)));
    const auto g = NeighborGraph::from_pairs(2, {{0, 1}}, {1.0});
    const Potentials pot{{-1.0, -1.0}, {-0.25}};
    MeanFieldOptions opts;
    opts.tol = 1e-10;
    const auto r = run_mean_field(g, pot, std::vector<double>{0.5, 0.5}, opts);
    const double err = std::max(std::abs(r.Q[0] - oracle), std::abs(r.Q[1] - oracle));
    return Outcome{r.converged && err < 1e-6, fmt("q = %.8f, oracle %.8f, err %.2e, %d sweeps (quoted 0.77015)",
                                                  r.Q[0], oracle, err, r.sweeps)};
  });

  run(7, "small instances vs brute force", [] {
    std::mt19937_64 rng(707);
    int instances = 0, mismatches = 0;
    double consistency = 0.0;
    for (; instances < 60; ++instances) {
      const int n = 2 + instances % 11;
      auto inst = tstest::random_instance(rng, n, 0.5, -2.5, 2.0);
      ProblemSpec spec = ProblemSpec::edges();
      if (instances % 3 == 0) spec.curvature.kind = CurvatureKind::absolute;
      const auto x = x_step(spec, inst.sites, inst.graph, inst.L, Labeling(n, 0));
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : tstest::all_labelings(n)) {
        const double e = total_energy(spec, inst.sites, inst.graph, inst.L, y);
        best = std::min(best, e);
        const std::vector<double> q(y.begin(), y.end());
        consistency = std::max(consistency, std::abs(expected_energy(spec, inst.sites, inst.graph, inst.L, q) - e));
      }
      if (std::abs(total_energy(spec, inst.sites, inst.graph, inst.L, x) - best) > 1e-12) ++mismatches;
    }
    return Outcome{mismatches == 0 && consistency <= 1e-12,
                   fmt("%d instances (n <= 12), %d mismatches, max |E[q=x] - E(x)| = %.2e", instances, mismatches,
                       consistency)};
  });

  run(8, "VI vs BCD on the gap instance", [] {
    const auto g = synth::gap_instance();
    const auto spec = ProblemSpec::edges();
    const std::vector<double> Q0(g.x0.begin(), g.x0.end());
    const auto vi = run_inference(spec, g.sites, g.graph, g.L0, {}, Q0);
    const auto bcd = run_bcd(spec, g.sites, g.graph, g.L0, g.x0);
    const auto xv = round_half(vi.Q);
    const double ev = total_energy(spec, g.sites, g.graph, vi.L, xv);
    const double eb = total_energy(spec, g.sites, g.graph, bcd.L, bcd.x);
    const bool vi_bridge = connected(g.graph, xv, g.segment_a, g.segment_b);
    const bool bcd_bridge = connected(g.graph, bcd.x, g.segment_a, g.segment_b);
    return Outcome{ev < eb && vi_bridge && !bcd_bridge,
                   fmt("E(VI) = %.4f, E(BCD) = %.4f, bridges: VI %d, BCD %d", ev, eb, vi_bridge, bcd_bridge)};
  });

  run(9, "sub-pixel localization", [] {
    const double edge = 10.3;
    const auto st = synth::step_edge(24, 16, edge);
    const auto rs = detect_edges_2d(st.image);
    double es = 0.0;
    std::size_t ns = 0;
    for (std::size_t i = 0; i < rs.sites.size(); ++i)
      if (rs.state.Q[i] >= 0.5) {
        es += std::abs(project_onto_line(rs.state.L[i], rs.sites.positions[i]).x() - edge);
        ++ns;
      }
    const double cx = 35.4, cy = 34.7, R = 24.0;
    const auto dk = synth::disk(70, 70, cx, cy, R);
    const auto rd = detect_edges_2d(dk.image);
    double ed = 0.0;
    std::size_t nd = 0;
    for (std::size_t i = 0; i < rd.sites.size(); ++i)
      if (rd.state.Q[i] >= 0.5) {
        const Vec3 p = project_onto_line(rd.state.L[i], rd.sites.positions[i]);
        ed += std::abs(std::hypot(p.x() - cx, p.y() - cy) - R);
        ++nd;
      }
    es = ns ? es / ns : 1e9;
    ed = nd ? ed / nd : 1e9;
    return Outcome{es < 0.25 && ed < 0.3,
                   fmt("step edge %.3f px over %zu sites, disk %.3f px over %zu sites", es, ns, ed, nd)};
  });

  run(10, "synthetic edge F-measure (CLI)", [] {
    const fs::path dir = fs::temp_directory_path() / "ts_acceptance_f";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string d = dir.string();
    const std::vector<std::pair<std::string, std::string>> cases{
        {"disk_a", "disk --width 64 --height 64 --cx 31.6 --cy 32.3 --radius 20 --seed 11"},
        {"disk_b", "disk --width 48 --height 48 --cx 24.2 --cy 23.7 --radius 12.5 --seed 12"},
        {"poly_a", "polygon --width 64 --height 64 --sides 5 --radius 24 --rotation 0.3 --seed 13"},
        {"poly_b", "polygon --width 64 --height 64 --sides 3 --radius 26 --rotation 0.1 --seed 14"},
        {"gap", "gap-image --length 24 --gap 6 --seed 15"},
    };
    std::string detail;
    bool ok = true;
    double worst = 1.0;
    for (const auto& [stem, args] : cases) {
      std::string out;
      double f = -1.0;
      if (run_cli("synth " + args + " --noise 10 --out-dir " + d + " --stem " + stem) == 0 &&
          run_cli("edges2d " + d + "/" + stem + ".pgm --scale 1 --out-dir " + d + "/" + stem + "_run") == 0 &&
          run_cli("eval " + d + "/" + stem + "_run/mask.pgm " + d + "/" + stem + "_truth.pgm --rho 2", &out) == 0) {
        const auto at = out.find("best_f=");
        if (at != std::string::npos) f = std::stod(out.substr(at + 7));
      }
      ok = ok && f >= 0.90;
      worst = std::min(worst, f);
      detail += fmt("%s %.3f ", stem.c_str(), f);
    }
    fs::remove_all(dir);
    return Outcome{ok, detail + fmt("(min %.3f)", worst)};
  });

  run(11, "3D helix tube", [] {
    synth::TubeStyle style;
    style.size = 64;
    const auto t = synth::tube(synth::TubeShape::helix, style);
    const auto rv = detect_vessels_3d(t.field);
    std::vector<Vec3> truth;
    std::vector<std::size_t> on;
    for (std::size_t s = 0; s < rv.sites.size(); ++s) {
      truth.push_back(t.truth_tangent[rv.grid.voxel_of_site[s]]);
      if (rv.state.Q[s] >= 0.5) on.push_back(s);
    }
    const double ev = mean_angle_error(truth, rv.state.L, on);
    const auto rr = fit_tangents_fixed_q(t.field, 0.3, 0.8);
    std::vector<Vec3> rtruth;
    std::vector<std::size_t> all;
    for (std::size_t s = 0; s < rr.sites.size(); ++s) {
      rtruth.push_back(t.truth_tangent[rr.grid.voxel_of_site[s]]);
      all.push_back(s);
    }
    const double er = mean_angle_error(rtruth, rr.fit.L, all);
    return Outcome{ev < 10.0 && er < 10.0, fmt("vessels %.2f deg over %zu voxels, ridges %.2f deg over %zu voxels", ev,
                                                on.size(), er, all.size())};
  });

  run(12, "large-epsilon weights recover squared", [] {
    std::mt19937_64 rng(1212);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int pairs = 0;
    double worst = 0.0, wdev = 0.0;
    for (; pairs < 200; ++pairs) {
      // chord in [0.5, 1]; tangents through the points keep d <= chord
      const Vec3 a(u(rng) * 4, u(rng) * 4, 0.0);
      const double c = 0.5 + 0.5 * u(rng), phi = 2 * kPi * u(rng);
      const Vec3 b = a + c * Vec3(std::cos(phi), std::sin(phi), 0.0);
      const double ta = 2 * kPi * u(rng), tb = 2 * kPi * u(rng);
      SiteSet s = curve_sites({a, b});
      const auto g = NeighborGraph::from_pairs(2, {{0, 1}}, {1.0});
      const Tangents L{TangentLine::make(a, Vec3(std::cos(ta), std::sin(ta), 0)),
                       TangentLine::make(b, Vec3(std::cos(tb), std::sin(tb), 0))};
      const auto spec = ProblemSpec::point_cloud();
      const auto w = abs_curvature_weights(spec, s, g, L, 1e6);
      wdev = std::max({wdev, std::abs(w.forward[0] - 1.0), std::abs(w.backward[0] - 1.0)});
      const double dij = point_line_distance(L[0], b), dji = point_line_distance(L[1], a);
      const double weighted = (w.forward[0] * dij * dij + w.backward[0] * dji * dji) / (c * c);
      const double sq = curvature_pair(L[0], L[1], a, b, CurvatureKind::squared);
      if (sq > 0) worst = std::max(worst, std::abs(weighted - sq) / sq);
    }
    return Outcome{worst < 1e-6, fmt("%d pairs, max relative gap %.2e, max |w - 1| = %.2e", pairs, worst, wdev)};
  });

  run(13, "gamma monotonicity", [] {
    synth::ImageStyle style;
    style.noise = 10.0;
    style.seed = 1313;
    const auto st = synth::step_edge(32, 24, 15.6, style);
    auto count = [&](double gamma) {
      EdgeParams p;
      p.spec.gamma = gamma;
      const auto r = detect_edges_2d(st.image, p);
      int n = 0;
      for (double q : r.state.Q) n += q >= 0.5;
      return n;
    };
    const int c0 = count(0.0), c1 = count(0.25);
    return Outcome{c1 >= c0, fmt("q >= 1/2 sites: gamma 0 -> %d, gamma 0.25 -> %d", c0, c1)};
  });

  std::printf("%s (%d undocumented failure%s)\n", g_failures ? "FAILED" : "OK", g_failures, g_failures == 1 ? "" : "s");
  return g_failures ? 1 : 0;
}
