#include "thinstruct/graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <utility>

#include "thinstruct/error.hpp"

namespace thinstruct {

NeighborGraph NeighborGraph::from_pairs(int site_count, std::vector<NeighborPair> pairs,
                                        std::vector<double> weights) {
  if (site_count < 0) throw InputError("negative site count");
  if (weights.size() != pairs.size()) throw InputError("pair/weight count mismatch");
  NeighborGraph g;
  g.site_count = site_count;
  g.neighbors.assign(static_cast<std::size_t>(site_count), {});
  std::set<std::pair<int, int>> seen;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    if (i < 0 || j < 0 || i >= site_count || j >= site_count)
      throw InputError("pair references site outside [0, " + std::to_string(site_count) + ")");
    if (i >= j) throw InputError("pairs must satisfy i < j");
    if (!seen.emplace(i, j).second) throw InputError("duplicate pair");
    g.neighbors[i].push_back({j, static_cast<int>(p)});
    g.neighbors[j].push_back({i, static_cast<int>(p)});
  }
  g.pairs = std::move(pairs);
  g.weights = std::move(weights);
  return g;
}

NeighborGraph build_grid_2d(int width, int height) {
  if (width < 1 || height < 1) throw InputError("grid dimensions must be >= 1");
  // Forward offsets only, so every pair is emitted once with i < j.
  constexpr int kOffsets[4][2] = {{1, 0}, {-1, 1}, {0, 1}, {1, 1}};
  std::vector<NeighborPair> pairs;
  pairs.reserve(static_cast<std::size_t>(width) * height * 4);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int i = y * width + x;
      for (const auto& o : kOffsets) {
        const int xx = x + o[0], yy = y + o[1];
        if (xx < 0 || xx >= width || yy >= height) continue;
        pairs.push_back({i, yy * width + xx});
      }
    }
  }
  std::vector<double> w(pairs.size(), 1.0);
  return NeighborGraph::from_pairs(width * height, std::move(pairs), std::move(w));
}

MaskedGrid3d build_grid_3d(int nx, int ny, int nz, const std::vector<std::uint8_t>* mask) {
  if (nx < 1 || ny < 1 || nz < 1) throw InputError("volume dimensions must be >= 1");
  const std::size_t total = static_cast<std::size_t>(nx) * ny * nz;
  if (mask && mask->size() != total) throw InputError("mask size does not match volume");

  MaskedGrid3d out;
  out.nx = nx;
  out.ny = ny;
  out.nz = nz;
  out.site_of_voxel.assign(total, -1);
  for (std::size_t v = 0; v < total; ++v) {
    if (mask && !(*mask)[v]) continue;
    out.site_of_voxel[v] = static_cast<int>(out.voxel_of_site.size());
    out.voxel_of_site.push_back(static_cast<int>(v));
  }
  if (out.voxel_of_site.empty()) throw InputError("mask retains no voxels");

  // The 13 offsets whose linear index is larger than the origin's.
  std::vector<std::array<int, 3>> forward;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (dz > 0 || (dz == 0 && (dy > 0 || (dy == 0 && dx > 0)))) forward.push_back({dx, dy, dz});

  std::vector<NeighborPair> pairs;
  for (std::size_t s = 0; s < out.voxel_of_site.size(); ++s) {
    const int v = out.voxel_of_site[s];
    const int x = v % nx, y = (v / nx) % ny, z = v / (nx * ny);
    for (const auto& o : forward) {
      const int xx = x + o[0], yy = y + o[1], zz = z + o[2];
      if (xx < 0 || xx >= nx || yy < 0 || yy >= ny || zz < 0 || zz >= nz) continue;
      const int t = out.site_of_voxel[(static_cast<std::size_t>(zz) * ny + yy) * nx + xx];
      if (t >= 0) pairs.push_back({static_cast<int>(s), t});
    }
  }
  std::vector<double> w(pairs.size(), 1.0);
  out.graph = NeighborGraph::from_pairs(static_cast<int>(out.voxel_of_site.size()), std::move(pairs),
                                        std::move(w));
  return out;
}

NeighborGraph build_knn(std::span<const Vec3> points, int k) {
  const int n = static_cast<int>(points.size());
  if (k < 1) throw InputError("knn: k must be >= 1");
  if (k >= n) throw InputError("knn: k must be smaller than the number of points");

  // selected[i] = the k nearest other points of i (ties broken by index).
  std::vector<std::vector<int>> selected(n);
  std::vector<int> order;
  for (int i = 0; i < n; ++i) {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> d2(n);
    for (int j = 0; j < n; ++j) d2[j] = (points[j] - points[i]).squaredNorm();
    auto closer = [&](int a, int b) { return d2[a] != d2[b] ? d2[a] < d2[b] : a < b; };
    order.erase(order.begin() + i);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), closer);
    selected[i].assign(order.begin(), order.begin() + k);
    std::sort(selected[i].begin(), selected[i].end());
  }

  auto selects = [&](int a, int b) {
    return std::binary_search(selected[a].begin(), selected[a].end(), b);
  };
  std::vector<NeighborPair> pairs;
  std::vector<double> w;
  const double row = 1.0 / k;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool ij = selects(i, j), ji = selects(j, i);
      if (!ij && !ji) continue;
      pairs.push_back({i, j});
      w.push_back(0.5 * ((ij ? row : 0.0) + (ji ? row : 0.0)));
    }
  }

  // One symmetric renormalization step: w_ij /= sqrt(s_i s_j).
  std::vector<double> rowsum(n, 0.0);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    rowsum[pairs[p].i] += w[p];
    rowsum[pairs[p].j] += w[p];
  }
  for (std::size_t p = 0; p < pairs.size(); ++p)
    w[p] /= std::sqrt(rowsum[pairs[p].i] * rowsum[pairs[p].j]);

  std::fill(rowsum.begin(), rowsum.end(), 0.0);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    rowsum[pairs[p].i] += w[p];
    rowsum[pairs[p].j] += w[p];
  }
  double residual = 0.0;
  for (double s : rowsum) residual = std::max(residual, std::abs(s - 1.0));

  NeighborGraph g = NeighborGraph::from_pairs(n, std::move(pairs), std::move(w));
  g.weight_residual = residual;
  return g;
}

}  // namespace thinstruct
