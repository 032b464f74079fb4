#include "thinstruct/pipelines.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <numeric>

#include "thinstruct/error.hpp"
#include "thinstruct/parallel.hpp"

namespace thinstruct {

Vec3 pixel_center(int col, int row) { return Vec3(col + 0.5, row + 0.5, 0.0); }
Vec3 voxel_center(int x, int y, int z) { return Vec3(x + 0.5, y + 0.5, z + 0.5); }

namespace {

// Sample standard deviation (n - 1) of a sequence.
template <class Range, class Fn>
double sample_std(const Range& r, Fn&& value) {
  const std::size_t n = std::size(r);
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (const auto& e : r) mean += value(e);
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (const auto& e : r) {
    const double d = value(e) - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(n - 1));
}

double normalization_divisor(double std_dev, GradientNormalization norm) {
  return norm == GradientNormalization::variance ? std_dev * std_dev : std_dev;
}

}  // namespace

GradientField sobel_gradients(const GrayImage& image, GradientNormalization norm) {
  if (image.width < 3 || image.height < 3) throw InputError("image must be at least 3x3");
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height)
    throw InputError("image buffer size mismatch");
  GradientField f;
  f.width = image.width;
  f.height = image.height;
  f.g.assign(image.pixels.size(), Vec3::Zero());
  auto px = [&](int x, int y) {
    return image.at(std::clamp(x, 0, image.width - 1), std::clamp(y, 0, image.height - 1));
  };
  parallel_for(static_cast<std::size_t>(image.height), [&](std::size_t lo, std::size_t hi) {
    for (int y = static_cast<int>(lo); y < static_cast<int>(hi); ++y)
      for (int x = 0; x < image.width; ++x) {
        const double gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1)) -
                          (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
        const double gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1)) -
                          (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
        f.g[static_cast<std::size_t>(y) * image.width + x] = Vec3(gx, gy, 0.0);
      }
  });
  const double sd = sample_std(f.g, [](const Vec3& g) { return g.norm(); });
  if (!(sd > 0.0)) {
    std::fill(f.g.begin(), f.g.end(), Vec3::Zero());
    f.divisor = 0.0;
    return f;
  }
  f.divisor = normalization_divisor(sd, norm);
  for (auto& g : f.g) g /= f.divisor;
  return f;
}

std::vector<double> edge_likelihoods(const GradientField& field, const LikelihoodMap& map) {
  std::vector<double> lambda(field.g.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) lambda[i] = map.offset - map.slope * field.g[i].norm();
  return lambda;
}

Tangents init_edge_tangents(const GradientField& field, InitMode mode) {
  Tangents L(field.g.size());
  for (int y = 0; y < field.height; ++y)
    for (int x = 0; x < field.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * field.width + x;
      const Vec3& g = field.g[i];
      Vec3 d = Vec3::UnitX();
      if (g.norm() > 0.0) d = mode == InitMode::perpendicular ? Vec3(-g.y(), g.x(), 0.0) : g;
      L[i] = TangentLine::make(pixel_center(x, y), d);
    }
  return L;
}

SubpixelMask subpixel_mask(std::span<const TangentLine> L, std::span<const double> Q, const SiteSet& sites,
                           int image_width, int image_height, int scale, double q_min) {
  if (scale < 1) throw InputError("mask scale must be >= 1");
  if (L.size() != sites.size() || Q.size() != sites.size()) throw InputError("state/site count mismatch");
  SubpixelMask m;
  m.scale = scale;
  m.width = image_width * scale;
  m.height = image_height * scale;
  m.values.assign(static_cast<std::size_t>(m.width) * m.height, 0.0);
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (Q[i] < q_min) continue;
    const Vec3 p = project_onto_line(L[i], sites.positions[i]);
    const double cx = std::floor(scale * p.x()), cy = std::floor(scale * p.y());
    if (!(cx >= 0.0 && cy >= 0.0 && cx < m.width && cy < m.height)) {
      ++m.dropped;
      continue;
    }
    double& cell = m.values[static_cast<std::size_t>(cy) * m.width + static_cast<std::size_t>(cx)];
    cell = std::max(cell, Q[i]);
  }
  return m;
}

EdgeResult detect_edges_2d(const GrayImage& image, const EdgeParams& params) {
  params.spec.validate();
  EdgeResult res;
  res.gradients = sobel_gradients(image, params.normalization);
  res.sites.dim = 2;
  res.sites.lambdas = edge_likelihoods(res.gradients, params.likelihood);
  res.sites.positions.resize(image.pixels.size());
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      res.sites.positions[static_cast<std::size_t>(y) * image.width + x] = pixel_center(x, y);
  const NeighborGraph graph = build_grid_2d(image.width, image.height);
  const Tangents L0 = init_edge_tangents(res.gradients, params.init);
  res.state = run_inference(params.spec, res.sites, graph, L0, params.inference);
  res.mask = subpixel_mask(res.state.L, res.state.Q, res.sites, image.width, image.height, params.scale,
                           params.q_min);
  return res;
}

Tangents pca_tangents(const SiteSet& sites, const NeighborGraph& graph) {
  Tangents L(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    std::vector<Vec3> pts{sites.positions[i]};
    for (const auto& nb : graph.neighbors[i]) pts.push_back(sites.positions[nb.site]);
    Vec3 mean = Vec3::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
    for (const auto& p : pts) C += (p - mean) * (p - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(C);
    Vec3 d = es.eigenvectors().col(2);
    if (sites.dim == 2) d.z() = 0.0;
    L[i] = TangentLine::make(sites.positions[i], d);
  }
  return L;
}

PointCloudResult fit_point_cloud(std::span<const Vec3> points, int dim, const PointCloudParams& params) {
  if (points.size() < 2) throw InputError("point cloud needs at least 2 points");
  if (dim != 2 && dim != 3) throw InputError("point dimension must be 2 or 3");
  PointCloudResult res;
  res.sites.dim = dim;
  res.sites.positions.assign(points.begin(), points.end());
  if (dim == 2)
    for (auto& p : res.sites.positions) p.z() = 0.0;
  res.sites.lambdas.assign(points.size(), 0.0);
  const int k = std::min<int>(params.k_nn, static_cast<int>(points.size()) - 1);
  res.graph = build_knn(res.sites.positions, k);
  ProblemSpec spec = ProblemSpec::point_cloud();
  spec.sigma = params.sigma;
  spec.curvature = params.curvature;
  res.initial = pca_tangents(res.sites, res.graph);
  const std::vector<double> Q(points.size(), 1.0);
  res.fit = lm_solve(spec, res.sites, res.graph, res.initial, Q, params.solver);
  return res;
}

void VesselField::validate() const {
  if (nx < 1 || ny < 1 || nz < 1) throw InputError("vessel field dimensions must be positive");
  const std::size_t n = voxel_count();
  if (v.size() != n || gx.size() != n || gy.size() != n || gz.size() != n || sigma.size() != n)
    throw InputError("vessel field plane size does not match dimensions");
}

std::vector<std::uint8_t> keep_top_fraction(std::span<const float> v, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InputError("keep fraction must be in (0, 1]");
  const std::size_t n = v.size();
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto order = [&](std::size_t a, std::size_t b) { return v[a] > v[b] || (v[a] == v[b] && a < b); };
  if (keep < n) std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(), order);
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t k = 0; k < std::min(keep, n); ++k) mask[idx[k]] = 1;
  return mask;
}

namespace {

struct VesselSites {
  SiteSet sites;
  Tangents L0;
};

VesselSites vessel_sites(const VesselField& field, const MaskedGrid3d& grid, const VesselParams& params) {
  const double sd = sample_std(field.v, [](float x) { return static_cast<double>(x); });
  const double div = sd > 0.0 ? normalization_divisor(sd, params.normalization) : 0.0;
  VesselSites out;
  SiteSet& s = out.sites;
  s.dim = 3;
  const std::size_t n = grid.voxel_of_site.size();
  s.positions.resize(n);
  s.lambdas.resize(n);
  s.priors.resize(n);
  s.scales.resize(n);
  out.L0.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int vox = grid.voxel_of_site[i];
    const int x = vox % field.nx, y = (vox / field.nx) % field.ny, z = vox / (field.nx * field.ny);
    s.positions[i] = voxel_center(x, y, z);
    const double vt = div > 0.0 ? field.v[vox] / div : 0.0;
    s.lambdas[i] = params.likelihood.offset - params.likelihood.slope * vt;
    s.priors[i] = field.direction(vox);
    s.scales[i] = field.sigma[vox];
    if (!(s.scales[i] > 0.0)) throw InputError("vessel scale must be > 0 on retained voxels");
    out.L0[i] = TangentLine::make(s.positions[i], s.priors[i]);
  }
  return out;
}

ProblemSpec vessel_spec(const VesselParams& params) {
  ProblemSpec spec = ProblemSpec::vessels();
  spec.beta = params.beta;
  spec.sigma_multiplier = params.k;
  spec.alignment_power = params.alignment_power;
  spec.curvature = params.curvature;
  return spec;
}

}  // namespace

VesselResult detect_vessels_3d(const VesselField& field, const VesselParams& params) {
  field.validate();
  const auto mask = keep_top_fraction(field.v, params.keep_fraction);
  VesselResult res;
  res.grid = build_grid_3d(field.nx, field.ny, field.nz, &mask);
  auto vs = vessel_sites(field, res.grid, params);
  res.sites = std::move(vs.sites);
  res.state = run_inference(vessel_spec(params), res.sites, res.grid.graph, vs.L0, params.inference);
  return res;
}

std::vector<std::uint8_t> hysteresis_3d(const VesselField& field, double low, double high) {
  field.validate();
  if (!(low <= high)) throw InputError("hysteresis requires low <= high");
  const std::size_t n = field.voxel_count();
  std::vector<std::uint8_t> ridge(n, 0);
  std::deque<std::size_t> queue;
  for (std::size_t k = 0; k < n; ++k)
    if (field.v[k] >= high) {
      ridge[k] = 1;
      queue.push_back(k);
    }
  const int nx = field.nx, ny = field.ny, nz = field.nz;
  while (!queue.empty()) {
    const std::size_t k = queue.front();
    queue.pop_front();
    const int x = static_cast<int>(k % nx), y = static_cast<int>((k / nx) % ny), z = static_cast<int>(k / (nx * ny));
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int X = x + dx, Y = y + dy, Z = z + dz;
          if (X < 0 || Y < 0 || Z < 0 || X >= nx || Y >= ny || Z >= nz) continue;
          const std::size_t m = (static_cast<std::size_t>(Z) * ny + Y) * nx + X;
          if (!ridge[m] && field.v[m] >= low) {
            ridge[m] = 1;
            queue.push_back(m);
          }
        }
  }
  return ridge;
}

RidgeResult fit_tangents_fixed_q(const VesselField& field, double low, double high, const VesselParams& params) {
  RidgeResult res;
  res.ridge = hysteresis_3d(field, low, high);
  if (std::none_of(res.ridge.begin(), res.ridge.end(), [](std::uint8_t b) { return b != 0; })) return res;
  res.grid = build_grid_3d(field.nx, field.ny, field.nz, &res.ridge);
  auto vs = vessel_sites(field, res.grid, params);
  res.sites = std::move(vs.sites);
  const std::vector<double> Q(res.sites.size(), 1.0);
  res.fit = lm_solve(vessel_spec(params), res.sites, res.grid.graph, vs.L0, Q, params.inference.solver);
  return res;
}

}  // namespace thinstruct
