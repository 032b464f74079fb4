#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "thinstruct/geometry.hpp"

namespace thinstruct {

struct NeighborPair {
  int i = 0;
  int j = 0;  // always i < j
};

struct Neighbor {
  int site = 0;
  int pair = 0;
};

/// Undirected neighborhood system with one weight per pair.
struct NeighborGraph {
  int site_count = 0;
  std::vector<NeighborPair> pairs;
  std::vector<double> weights;
  std::vector<std::vector<Neighbor>> neighbors;
  /// max_i |sum_j w_ij - 1| after renormalization; 0 for grid graphs.
  double weight_residual = 0.0;

  std::size_t pair_count() const { return pairs.size(); }

  /// Builds the adjacency index from `pairs`; throws on self-loops,
  /// duplicates, out-of-range ids or a weights/pairs size mismatch.
  static NeighborGraph from_pairs(int site_count, std::vector<NeighborPair> pairs,
                                  std::vector<double> weights);
};

/// 8-connected pixel lattice, sites in raster order (site = y * width + x).
NeighborGraph build_grid_2d(int width, int height);

/// 26-connected voxel lattice restricted to a mask, with dense re-indexing.
struct MaskedGrid3d {
  int nx = 0, ny = 0, nz = 0;
  NeighborGraph graph;
  std::vector<int> voxel_of_site;  // linear voxel index, x fastest
  std::vector<int> site_of_voxel;  // -1 for removed voxels
};

/// `mask` (optional) has nx*ny*nz entries, nonzero = retained.
MaskedGrid3d build_grid_3d(int nx, int ny, int nz, const std::vector<std::uint8_t>* mask = nullptr);

/// Symmetrized k-nearest-neighbor graph with renormalized weights.
NeighborGraph build_knn(std::span<const Vec3> points, int k);

}  // namespace thinstruct
