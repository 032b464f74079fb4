#pragma once

// Small helpers shared by the test binaries.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "thinstruct/energy.hpp"
#include "thinstruct/graph.hpp"

namespace tstest {

using thinstruct::Labeling;
using thinstruct::NeighborGraph;
using thinstruct::NeighborPair;
using thinstruct::SiteSet;
using thinstruct::TangentLine;
using thinstruct::Tangents;
using thinstruct::Vec3;

inline constexpr double kPi = 3.14159265358979323846;

inline double angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::abs(a.normalized().dot(b.normalized()));
  return std::acos(std::min(1.0, c)) * 180.0 / kPi;
}

inline Vec3 rot2(const Vec3& v, double t) {
  return {std::cos(t) * v.x() - std::sin(t) * v.y(), std::sin(t) * v.x() + std::cos(t) * v.y(), v.z()};
}

struct Instance {
  SiteSet sites;
  NeighborGraph graph;
  Tangents L;
};

/// Random planar instance: n sites in a 6x6 box, each pair kept with
/// probability p_edge, tangents through jittered copies of the sites.
inline Instance random_instance(std::mt19937_64& rng, int n, double p_edge = 0.5, double lambda_lo = -2.0,
                                double lambda_hi = 2.0) {
  std::uniform_real_distribution<double> box(0.0, 6.0), ang(0.0, kPi), lam(lambda_lo, lambda_hi),
      off(-1.5, 1.5), coin(0.0, 1.0);
  Instance inst;
  inst.sites.dim = 2;
  for (int i = 0; i < n; ++i) {
    inst.sites.positions.emplace_back(box(rng), box(rng), 0.0);
    inst.sites.lambdas.push_back(lam(rng));
    const double t = ang(rng);
    inst.L.push_back(TangentLine::make(inst.sites.positions.back() + Vec3(off(rng), off(rng), 0.0),
                                       Vec3(std::cos(t), std::sin(t), 0.0)));
  }
  std::vector<NeighborPair> pairs;
  std::vector<double> w;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (coin(rng) < p_edge) {
        pairs.push_back({i, j});
        w.push_back(0.5 + coin(rng));
      }
  inst.graph = NeighborGraph::from_pairs(n, std::move(pairs), std::move(w));
  return inst;
}

/// Every labeling of n sites, in binary counting order.
inline std::vector<Labeling> all_labelings(int n) {
  std::vector<Labeling> out;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
    Labeling x(n);
    for (int i = 0; i < n; ++i) x[i] = (m >> i) & 1u;
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace tstest
