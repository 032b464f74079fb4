#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "thinstruct/energy.hpp"
#include "thinstruct/error.hpp"

using namespace thinstruct;
using tstest::kPi;

namespace {

// Independent evaluation straight from the geometric primitives.
double naive_energy(const ProblemSpec& spec, const SiteSet& s, const NeighborGraph& g, const Tangents& L,
                    const std::vector<double>& x) {
  double e = 0.0;
  for (std::size_t p = 0; p < g.pairs.size(); ++p) {
    const int i = g.pairs[p].i, j = g.pairs[p].j;
    const Vec3 pi = project_onto_line(L[i], s.positions[i]);
    const Vec3 pj = project_onto_line(L[j], s.positions[j]);
    e += g.weights[p] * (curvature_pair(L[i], L[j], pi, pj, spec.curvature.kind) - spec.gamma) * x[i] * x[j];
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = spec.distance == DistanceMode::truncated ? truncated_distance(L[i], s.positions[i], spec.tau)
                                                              : point_line_distance(L[i], s.positions[i]);
    double u = d * d / (spec.sigma * spec.sigma) + s.lambdas[i];
    if (spec.beta > 0.0) u += spec.beta * std::pow(misalignment(L[i], s.priors[i]), spec.alignment_power);
    e += u * x[i];
  }
  return e;
}

ProblemSpec plain(double gamma = 0.0) {
  ProblemSpec spec;
  spec.gamma = gamma;
  spec.distance = DistanceMode::euclidean;
  return spec;
}

SiteSet two_collinear(double lambda) {
  SiteSet s;
  s.positions = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  s.lambdas = {lambda, lambda};
  return s;
}

}  // namespace

TEST(UnaryPotential, Examples) {
  SiteSet s;
  s.positions = {Vec3(2, 3, 0)};
  s.lambdas = {0.4};
  const auto through = TangentLine::make(Vec3(2, 3, 0), Vec3(1, 0, 0));
  EXPECT_NEAR(unary_potential(ProblemSpec::edges(), s, through, 0), 0.4, 1e-15);

  s.lambdas = {0.0};
  const auto half = TangentLine::make(Vec3(2, 3.5, 0), Vec3(1, 0, 0));
  EXPECT_EQ(unary_potential(ProblemSpec::edges(), s, half, 0), 0.0);

  ProblemSpec spec = plain();
  spec.sigma = 2.0;
  s.lambdas = {1.0};
  const auto far = TangentLine::make(Vec3(2, 6, 0), Vec3(1, 0, 0));
  EXPECT_NEAR(unary_potential(spec, s, far, 0), 3.25, 1e-15);
}

TEST(UnaryPotential, AlignmentPowerAndVesselScale) {
  SiteSet s;
  s.dim = 3;
  s.positions = {Vec3(0, 0, 0)};
  s.lambdas = {0.0};
  s.priors = {Vec3(1, 1, 0)};
  s.scales = {0.5};
  ProblemSpec spec = ProblemSpec::vessels();
  spec.beta = 2.0;
  const auto l = TangentLine::make(Vec3(0, 3, 0), Vec3(1, 0, 0));
  // distance 3, sigma_eff = 20 * 0.5 = 10; m = 1
  spec.alignment_power = 2;
  EXPECT_NEAR(unary_potential(spec, s, l, 0), 9.0 / 100.0 + 2.0, 1e-14);
  spec.alignment_power = 1;
  s.priors = {Vec3(2, 2, 0)};  // m = 2
  EXPECT_NEAR(unary_potential(spec, s, l, 0), 9.0 / 100.0 + 4.0, 1e-14);
}

TEST(PairwisePotential, Examples) {
  const auto l = TangentLine::make(Vec3::Zero(), Vec3(1, 0, 0));
  EXPECT_NEAR(pairwise_potential(plain(0.25), l, l, Vec3(0, 0, 0), Vec3(1, 0, 0)), -0.25, 1e-15);
  EXPECT_EQ(pairwise_potential(plain(0.0), l, l, Vec3(0, 0, 0), Vec3(1, 0, 0)), 0.0);

  const double t = kPi / 6;
  const auto a = TangentLine::make(Vec3(1, 0, 0), Vec3(0, 1, 0));
  const auto b = TangentLine::make(Vec3(std::cos(t), std::sin(t), 0), Vec3(-std::sin(t), std::cos(t), 0));
  const double v = pairwise_potential(plain(0.0), a, b, a.anchor, b.anchor);
  // squared mode: 2 (1 - cos t)^2 / (2 sin(t/2))^2 = 2 sin^2(t/2)
  const double d = 1 - std::cos(t), chord = 2 * std::sin(t / 2);
  EXPECT_NEAR(v, 2 * d * d / (chord * chord), 1e-12);
  EXPECT_NEAR(v, 2 * std::pow(std::sin(kPi / 12), 2), 1e-12);
}

TEST(TotalEnergy, Examples) {
  SiteSet one;
  one.positions = {Vec3(1, 1, 0)};
  one.lambdas = {0.4};
  const auto g1 = NeighborGraph::from_pairs(1, {}, {});
  const Tangents L1{TangentLine::make(Vec3(1, 1, 0), Vec3(0, 1, 0))};
  EXPECT_EQ(total_energy(plain(), one, g1, L1, Labeling{0}), 0.0);
  EXPECT_NEAR(total_energy(plain(), one, g1, L1, Labeling{1}), 0.4, 1e-15);

  const auto s = two_collinear(-1.0);
  const auto g = NeighborGraph::from_pairs(2, {{0, 1}}, {1.0});
  const Tangents L(2, TangentLine::make(Vec3::Zero(), Vec3(1, 0, 0)));
  EXPECT_NEAR(total_energy(plain(), s, g, L, Labeling{1, 1}), -2.0, 1e-15);
  EXPECT_EQ(total_energy(plain(), s, g, L, Labeling{0, 0}), 0.0);
}

TEST(ExpectedEnergy, Examples) {
  const auto s = two_collinear(1.0);
  const auto g = NeighborGraph::from_pairs(2, {{0, 1}}, {1.0});
  const Tangents L(2, TangentLine::make(Vec3::Zero(), Vec3(1, 0, 0)));
  const std::vector<double> zero{0.0, 0.0};
  EXPECT_EQ(expected_energy(plain(), s, g, L, zero), 0.0);

  Potentials pot;
  pot.unary = {1.0, 1.0};
  pot.pairwise = {4.0};
  const std::vector<double> half{0.5, 0.5};
  EXPECT_DOUBLE_EQ(expected_energy(g, pot, half), 2.0);
}

TEST(ExpectedEnergy, BinaryConsistencyOnRandomInstances) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 30; ++t) {
    const int n = 2 + t % 9;
    auto inst = tstest::random_instance(rng, n);
    ProblemSpec spec = ProblemSpec::edges();
    spec.curvature.kind = t % 2 ? CurvatureKind::absolute : CurvatureKind::squared;
    for (const auto& x : tstest::all_labelings(n)) {
      const std::vector<double> q(x.begin(), x.end());
      const double te = total_energy(spec, inst.sites, inst.graph, inst.L, x);
      EXPECT_NEAR(expected_energy(spec, inst.sites, inst.graph, inst.L, q), te, 1e-12 * std::max(1.0, std::abs(te)));
      EXPECT_NEAR(naive_energy(spec, inst.sites, inst.graph, inst.L, q), te, 1e-12 * std::max(1.0, std::abs(te)));
    }
  }
}

TEST(TotalEnergy, GammaShiftIdentity) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    auto inst = tstest::random_instance(rng, 8);
    Labeling x(8);
    for (auto& v : x) v = rng() & 1u;
    ProblemSpec with = ProblemSpec::edges(), without = with;
    without.gamma = 0.0;
    double active = 0.0;
    for (std::size_t p = 0; p < inst.graph.pairs.size(); ++p)
      active += inst.graph.weights[p] * x[inst.graph.pairs[p].i] * x[inst.graph.pairs[p].j];
    EXPECT_NEAR(total_energy(with, inst.sites, inst.graph, inst.L, x),
                total_energy(without, inst.sites, inst.graph, inst.L, x) - with.gamma * active, 1e-12);
  }
}

TEST(TotalEnergy, MonotoneInLambda) {
  std::mt19937_64 rng(12);
  auto inst = tstest::random_instance(rng, 6);
  Labeling x{1, 0, 1, 1, 0, 1};
  const auto spec = ProblemSpec::edges();
  const double base = total_energy(spec, inst.sites, inst.graph, inst.L, x);
  inst.sites.lambdas[2] += 0.75;
  EXPECT_NEAR(total_energy(spec, inst.sites, inst.graph, inst.L, x) - base, 0.75, 1e-12);
  inst.sites.lambdas[1] += 5.0;  // x_1 = 0
  EXPECT_NEAR(total_energy(spec, inst.sites, inst.graph, inst.L, x) - base, 0.75, 1e-12);
}

TEST(TotalEnergy, PointCloudNoiselessLineIsZero) {
  SiteSet s;
  for (int k = 0; k < 10; ++k) {
    s.positions.emplace_back(k * 0.7, 2.0, 0.0);
    s.lambdas.push_back(0.0);
  }
  const auto g = build_knn(s.positions, 2);
  const Tangents L(10, TangentLine::make(Vec3(0, 2, 0), Vec3(1, 0, 0)));
  EXPECT_EQ(total_energy(ProblemSpec::point_cloud(), s, g, L, Labeling(10, 1)), 0.0);
}

TEST(ProblemSpec, Validation) {
  ProblemSpec spec;
  spec.sigma = 0.0;
  EXPECT_THROW(spec.validate(), InputError);
  spec = ProblemSpec();
  spec.tau = -1.0;
  EXPECT_THROW(spec.validate(), InputError);
  spec = ProblemSpec();
  spec.alignment_power = 3;
  EXPECT_THROW(spec.validate(), InputError);
  EXPECT_NO_THROW(ProblemSpec::edges().validate());
  EXPECT_NO_THROW(ProblemSpec::vessels().validate());
}

TEST(Potentials, MatchPerPairEvaluation) {
  std::mt19937_64 rng(30);
  auto inst = tstest::random_instance(rng, 9);
  const auto spec = ProblemSpec::edges();
  const auto pot = compute_potentials(spec, inst.sites, inst.graph, inst.L);
  const auto P = denoised_points(spec, inst.sites, inst.L);
  for (std::size_t p = 0; p < inst.graph.pairs.size(); ++p) {
    const int i = inst.graph.pairs[p].i, j = inst.graph.pairs[p].j;
    EXPECT_EQ(pot.pairwise[p], pairwise_potential(spec, inst.L[i], inst.L[j], P[i], P[j]));
  }
  for (std::size_t i = 0; i < inst.sites.size(); ++i)
    EXPECT_EQ(pot.unary[i], unary_potential(spec, inst.sites, inst.L[i], i));
}
