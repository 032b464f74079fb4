#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "thinstruct/energy.hpp"
#include "thinstruct/graph.hpp"
#include "thinstruct/inference.hpp"
#include "thinstruct/solver.hpp"

namespace thinstruct {

/// Grayscale raster, row-major, values in the source intensity units.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Pixel (col, row) covers [col, col+1) x [row, row+1); its site sits at the
// center (col + 0.5, row + 0.5). Voxels follow the same convention.
Vec3 pixel_center(int col, int row);
Vec3 voxel_center(int x, int y, int z);

enum class GradientNormalization { std_dev, variance };

struct GradientField {
  int width = 0;
  int height = 0;
  std::vector<Vec3> g;   // normalized Sobel gradient per pixel
  double divisor = 0.0;  // 0 when the image is constant
};

GradientField sobel_gradients(const GrayImage& image, GradientNormalization norm = GradientNormalization::std_dev);

struct LikelihoodMap {
  double offset = 1.8;
  double slope = 1.4;
};

/// lambda_i = offset - slope * |g_i|
std::vector<double> edge_likelihoods(const GradientField& field, const LikelihoodMap& map = {});

enum class InitMode { perpendicular, paper_literal };

Tangents init_edge_tangents(const GradientField& field, InitMode mode = InitMode::perpendicular);

struct SubpixelMask {
  int scale = 1;
  int width = 0;   // scale * image width
  int height = 0;
  std::vector<double> values;
  std::size_t dropped = 0;  // projected points outside the canvas
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Quantizes denoised points at `scale` and keeps the largest marginal per cell.
SubpixelMask subpixel_mask(std::span<const TangentLine> L, std::span<const double> Q, const SiteSet& sites,
                           int image_width, int image_height, int scale, double q_min = 0.0);

struct EdgeParams {
  ProblemSpec spec = ProblemSpec::edges();
  LikelihoodMap likelihood;
  GradientNormalization normalization = GradientNormalization::std_dev;
  InitMode init = InitMode::perpendicular;
  int scale = 2;
  double q_min = 0.0;
  InferenceOptions inference;
};

struct EdgeResult {
  SiteSet sites;
  GradientField gradients;
  InferenceState state;
  SubpixelMask mask;
};

EdgeResult detect_edges_2d(const GrayImage& image, const EdgeParams& params = {});

struct PointCloudParams {
  double sigma = 1.0;
  CurvatureTerm curvature;
  int k_nn = 4;
  TrustRegionConfig solver;
};

struct PointCloudResult {
  SiteSet sites;
  NeighborGraph graph;
  Tangents initial;
  LmResult fit;
};

/// Principal direction of each site's kNN neighborhood (site included).
Tangents pca_tangents(const SiteSet& sites, const NeighborGraph& graph);

PointCloudResult fit_point_cloud(std::span<const Vec3> points, int dim, const PointCloudParams& params = {});

/// Volume of vesselness, filter direction and scale; x fastest.
struct VesselField {
  int nx = 0, ny = 0, nz = 0;
  std::vector<float> v;
  std::vector<float> gx, gy, gz;
  std::vector<float> sigma;
  std::size_t voxel_count() const { return static_cast<std::size_t>(nx) * ny * nz; }
  Vec3 direction(std::size_t k) const { return Vec3(gx[k], gy[k], gz[k]); }
  void validate() const;
};

struct VesselParams {
  double beta = 0.5;
  double k = 20.0;
  double keep_fraction = 0.15;
  int alignment_power = 2;
  CurvatureTerm curvature;
  LikelihoodMap likelihood;
  GradientNormalization normalization = GradientNormalization::std_dev;
  InferenceOptions inference;
};

struct VesselResult {
  MaskedGrid3d grid;
  SiteSet sites;
  InferenceState state;
};

/// Voxels with the largest vesselness, ties broken by voxel index.
std::vector<std::uint8_t> keep_top_fraction(std::span<const float> v, double fraction);

VesselResult detect_vessels_3d(const VesselField& field, const VesselParams& params = {});

/// 26-connected hysteresis: seeds at v >= high grown through voxels with v >= low.
std::vector<std::uint8_t> hysteresis_3d(const VesselField& field, double low, double high);

struct RidgeResult {
  std::vector<std::uint8_t> ridge;  // per voxel
  MaskedGrid3d grid;                // ridge voxels only
  SiteSet sites;
  LmResult fit;
  bool empty() const { return sites.size() == 0; }
};

RidgeResult fit_tangents_fixed_q(const VesselField& field, double low, double high, const VesselParams& params = {});

}  // namespace thinstruct
