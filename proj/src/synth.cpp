#include "thinstruct/synth.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>
#include <random>

#include "thinstruct/error.hpp"
#include "thinstruct/graph.hpp"

namespace thinstruct::synth {

namespace {

constexpr double kPi = std::numbers::pi;

// Renders fg/bg by supersampled coverage of `inside`.
template <class Inside>
GrayImage render(int width, int height, const ImageStyle& style, Inside&& inside) {
  if (width < 3 || height < 3) throw InputError("synthetic image must be at least 3x3");
  if (style.supersample < 1) throw InputError("supersample must be >= 1");
  GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(static_cast<std::size_t>(width) * height);
  const int s = style.supersample;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      int hits = 0;
      for (int sy = 0; sy < s; ++sy)
        for (int sx = 0; sx < s; ++sx)
          if (inside(x + (sx + 0.5) / s, y + (sy + 0.5) / s)) ++hits;
      const double c = static_cast<double>(hits) / (s * s);
      img.pixels[static_cast<std::size_t>(y) * width + x] = style.background + c * (style.foreground - style.background);
    }
  return img;
}

void finish(SyntheticImage& out, const ImageStyle& style) {
  if (style.noise > 0.0) add_noise(out.image, style.noise, style.seed);
  if (style.quantize)
    for (double& v : out.image.pixels) v = std::clamp(std::round(v), 0.0, 255.0);
}

void mark(std::vector<std::uint8_t>& truth, int width, int height, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  if (fx < 0 || fy < 0 || fx >= width || fy >= height) return;
  truth[static_cast<std::size_t>(fy) * width + static_cast<std::size_t>(fx)] = 1;
}

void mark_segment(std::vector<std::uint8_t>& truth, int width, int height, const Vec3& a, const Vec3& b) {
  const int steps = std::max(1, static_cast<int>(std::ceil((b - a).norm() / 0.05)));
  for (int k = 0; k <= steps; ++k) {
    const Vec3 p = a + (b - a) * (static_cast<double>(k) / steps);
    mark(truth, width, height, p.x(), p.y());
  }
}

bool point_in_polygon(const std::vector<Vec3>& v, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    const double xi = v[i].x(), yi = v[i].y(), xj = v[j].x(), yj = v[j].y();
    if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) in = !in;
  }
  return in;
}

void jitter(CurveSamples& c, double noise, std::uint64_t seed, int dim) {
  if (noise <= 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, noise);
  for (auto& p : c.points) {
    p.x() += n(rng);
    p.y() += n(rng);
    if (dim == 3) p.z() += n(rng);
  }
}

}  // namespace

void add_noise(GrayImage& image, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (double& v : image.pixels) v += n(rng);
}

SyntheticImage disk(int width, int height, double cx, double cy, double radius, const ImageStyle& style) {
  if (!(radius > 0.0)) throw InputError("disk radius must be > 0");
  SyntheticImage out;
  out.image = render(width, height, style, [&](double x, double y) {
    return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius;
  });
  out.truth.assign(out.image.pixels.size(), 0);
  const int steps = static_cast<int>(std::ceil(2.0 * kPi * radius / 0.05));
  for (int k = 0; k < steps; ++k) {
    const double t = 2.0 * kPi * k / steps;
    mark(out.truth, width, height, cx + radius * std::cos(t), cy + radius * std::sin(t));
  }
  finish(out, style);
  return out;
}

SyntheticImage polygon(int width, int height, const std::vector<Vec3>& vertices, const ImageStyle& style) {
  if (vertices.size() < 3) throw InputError("polygon needs at least 3 vertices");
  SyntheticImage out;
  out.image = render(width, height, style, [&](double x, double y) { return point_in_polygon(vertices, x, y); });
  out.truth.assign(out.image.pixels.size(), 0);
  for (std::size_t i = 0; i < vertices.size(); ++i)
    mark_segment(out.truth, width, height, vertices[i], vertices[(i + 1) % vertices.size()]);
  finish(out, style);
  return out;
}

SyntheticImage step_edge(int width, int height, double edge_x, const ImageStyle& style) {
  SyntheticImage out;
  // Coverage of a vertical edge is exact per pixel, no supersampling needed.
  ImageStyle exact = style;
  exact.supersample = 1;
  out.image = render(width, height, exact, [](double, double) { return false; });
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double c = std::clamp(x + 1.0 - edge_x, 0.0, 1.0);
      out.image.pixels[static_cast<std::size_t>(y) * width + x] =
          style.background + c * (style.foreground - style.background);
    }
  out.truth.assign(out.image.pixels.size(), 0);
  mark_segment(out.truth, width, height, Vec3(edge_x, 0.0, 0.0), Vec3(edge_x, height - 1e-9, 0.0));
  finish(out, style);
  return out;
}

SyntheticImage gap_image(int length, int gap, const ImageStyle& style) {
  if (length < 1 || gap < 0) throw InputError("gap image needs length >= 1 and gap >= 0");
  const int margin = 10, thickness = 10;
  const int width = 2 * length + gap + 2 * margin, height = thickness + 2 * margin;
  const double top = margin + 0.0, bottom = margin + thickness;
  const double a0 = margin, a1 = margin + length, b0 = a1 + gap, b1 = b0 + length;
  SyntheticImage out;
  out.image = render(width, height, style, [&](double x, double y) {
    return y >= top && y < bottom && ((x >= a0 && x < a1) || (x >= b0 && x < b1));
  });
  out.truth.assign(out.image.pixels.size(), 0);
  for (auto [x0, x1] : {std::pair{a0, a1}, std::pair{b0, b1}}) {
    const std::vector<Vec3> r{Vec3(x0, top, 0), Vec3(x1, top, 0), Vec3(x1, bottom, 0), Vec3(x0, bottom, 0)};
    for (std::size_t i = 0; i < 4; ++i) mark_segment(out.truth, width, height, r[i], r[(i + 1) % 4]);
  }
  finish(out, style);
  return out;
}

CurveSamples circle(double radius, int samples, double noise, std::uint64_t seed) {
  if (!(radius > 0.0) || samples < 3) throw InputError("circle needs radius > 0 and >= 3 samples");
  CurveSamples c;
  for (int k = 0; k < samples; ++k) {
    const double t = 2.0 * kPi * k / samples;
    c.points.emplace_back(radius * std::cos(t), radius * std::sin(t), 0.0);
    c.tangents.emplace_back(-std::sin(t), std::cos(t), 0.0);
  }
  jitter(c, noise, seed, 2);
  return c;
}

CurveSamples line(double length, int samples, double noise, std::uint64_t seed) {
  if (!(length > 0.0) || samples < 2) throw InputError("line needs length > 0 and >= 2 samples");
  CurveSamples c;
  for (int k = 0; k < samples; ++k) {
    c.points.emplace_back(length * k / (samples - 1), 0.0, 0.0);
    c.tangents.emplace_back(1.0, 0.0, 0.0);
  }
  jitter(c, noise, seed, 2);
  return c;
}

CurveSamples square(double side, int per_side, double noise, std::uint64_t seed) {
  if (!(side > 0.0) || per_side < 1) throw InputError("square needs side > 0 and >= 1 sample per side");
  CurveSamples c;
  const double h = side / per_side;
  const std::array<Vec3, 4> start{Vec3(0, 0, 0), Vec3(side, 0, 0), Vec3(side, side, 0), Vec3(0, side, 0)};
  const std::array<Vec3, 4> dir{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(-1, 0, 0), Vec3(0, -1, 0)};
  for (int s = 0; s < 4; ++s)
    for (int k = 0; k < per_side; ++k) {
      c.points.push_back(start[s] + dir[s] * ((k + 0.5) * h));
      c.tangents.push_back(dir[s]);
    }
  jitter(c, noise, seed, 2);
  return c;
}

CurveSamples rounded_square(double side, double corner, int samples, double noise, std::uint64_t seed) {
  if (!(side > 0.0) || !(corner >= 0.0) || 2.0 * corner > side || samples < 4)
    throw InputError("rounded square needs side > 0, 0 <= corner <= side / 2 and >= 4 samples");
  const double straight = side - 2.0 * corner;
  const double arc = 0.5 * kPi * corner;
  const double perimeter = 4.0 * (straight + arc);
  CurveSamples c;
  for (int k = 0; k < samples; ++k) {
    double s = perimeter * k / samples;
    // Walk the four (straight, arc) pieces counterclockwise from (corner, 0).
    Vec3 p, t;
    for (int q = 0; q < 4; ++q) {
      const double ang = 0.5 * kPi * q;
      const Vec3 d(std::cos(ang), std::sin(ang), 0.0);
      const Vec3 n(-d.y(), d.x(), 0.0);
      // Start of the straight piece for side q, rotated about the square center.
      const Vec3 center(side / 2, side / 2, 0.0);
      const Vec3 s0 = center - n * (side / 2) - d * (straight / 2);
      if (s <= straight) {
        p = s0 + d * s;
        t = d;
        break;
      }
      s -= straight;
      if (s <= arc || q == 3) {
        const double phi = std::min(s, arc) / std::max(corner, 1e-300);
        const Vec3 cc = s0 + d * straight + n * corner;
        p = cc - n * (corner * std::cos(phi)) + d * (corner * std::sin(phi));
        t = d * std::cos(phi) + n * std::sin(phi);
        break;
      }
      s -= arc;
    }
    c.points.push_back(p);
    c.tangents.push_back(t.normalized());
  }
  jitter(c, noise, seed, 2);
  return c;
}

TubeShape parse_tube_shape(const std::string& name) {
  if (name == "helix") return TubeShape::helix;
  if (name == "straight") return TubeShape::straight;
  if (name == "y" || name == "y-junction") return TubeShape::y_junction;
  throw InputError("unknown tube shape: " + name);
}

SyntheticVessels tube(TubeShape shape, const TubeStyle& style) {
  const int n = style.size;
  if (n < 4) throw InputError("tube volume size must be >= 4");
  if (!(style.tube_radius > 0.0)) throw InputError("tube radius must be > 0");

  // Dense center-line samples with tangents.
  std::vector<Vec3> pts, tans;
  auto add_segment = [&](const Vec3& a, const Vec3& b) {
    const int steps = std::max(1, static_cast<int>(std::ceil((b - a).norm() / 0.1)));
    const Vec3 d = (b - a).normalized();
    for (int k = 0; k <= steps; ++k) {
      pts.push_back(a + (b - a) * (static_cast<double>(k) / steps));
      tans.push_back(d);
    }
  };
  const double c = n / 2.0;
  switch (shape) {
    case TubeShape::helix: {
      const double R = n / 4.0, z0 = n * 0.1, z1 = n * 0.9, turns = 2.0;
      const double T = 2.0 * kPi * turns, rise = (z1 - z0) / T;
      const double len = T * std::hypot(R, rise);
      const int steps = static_cast<int>(std::ceil(len / 0.1));
      for (int k = 0; k <= steps; ++k) {
        const double t = T * k / steps;
        pts.emplace_back(c + R * std::cos(t), c + R * std::sin(t), z0 + rise * t);
        tans.push_back(Vec3(-R * std::sin(t), R * std::cos(t), rise).normalized());
      }
      break;
    }
    case TubeShape::straight:
      add_segment(Vec3(n * 0.1, c - n * 0.1, c - n * 0.05), Vec3(n * 0.9, c + n * 0.1, c + n * 0.05));
      break;
    case TubeShape::y_junction:
      add_segment(Vec3(c, c, n * 0.1), Vec3(c, c, c));
      add_segment(Vec3(c, c, c), Vec3(n * 0.25, c, n * 0.9));
      add_segment(Vec3(c, c, c), Vec3(n * 0.75, c, n * 0.9));
      break;
  }

  SyntheticVessels out;
  VesselField& f = out.field;
  f.nx = f.ny = f.nz = n;
  const std::size_t total = f.voxel_count();
  out.truth_distance.assign(total, std::numeric_limits<float>::infinity());
  out.truth_tangent.assign(total, Vec3::UnitX());
  const int reach = 10;
  std::vector<double> best(total, std::numeric_limits<double>::infinity());
  for (std::size_t s = 0; s < pts.size(); ++s) {
    const Vec3& p = pts[s];
    const int x0 = static_cast<int>(std::floor(p.x())), y0 = static_cast<int>(std::floor(p.y())),
              z0 = static_cast<int>(std::floor(p.z()));
    for (int z = std::max(0, z0 - reach); z <= std::min(n - 1, z0 + reach); ++z)
      for (int y = std::max(0, y0 - reach); y <= std::min(n - 1, y0 + reach); ++y)
        for (int x = std::max(0, x0 - reach); x <= std::min(n - 1, x0 + reach); ++x) {
          const std::size_t k = (static_cast<std::size_t>(z) * n + y) * n + x;
          const double d2 = (voxel_center(x, y, z) - p).squaredNorm();
          if (d2 < best[k]) {
            best[k] = d2;
            out.truth_tangent[k] = tans[s];
          }
        }
  }
  f.v.resize(total);
  f.gx.resize(total);
  f.gy.resize(total);
  f.gz.resize(total);
  f.sigma.assign(total, static_cast<float>(style.tube_radius));
  std::mt19937_64 rng(style.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double spread = std::tan(style.direction_noise_deg * kPi / 180.0);
  for (std::size_t k = 0; k < total; ++k) {
    const double d2 = best[k];
    out.truth_distance[k] = static_cast<float>(std::sqrt(d2));
    f.v[k] = std::isfinite(d2) ? static_cast<float>(std::exp(-d2 / 2.0)) : 0.0f;
    Vec3 g = out.truth_tangent[k];
    if (spread > 0.0) {
      Vec3 r(gauss(rng), gauss(rng), gauss(rng));
      r -= r.dot(g) * g;
      g = (g + spread * r / std::sqrt(2.0)).normalized();
    }
    f.gx[k] = static_cast<float>(g.x());
    f.gy[k] = static_cast<float>(g.y());
    f.gz[k] = static_cast<float>(g.z());
  }
  out.curve = std::move(pts);
  out.curve_tangent = std::move(tans);
  return out;
}

GapInstance gap_instance(const GapStyle& style) {
  if (style.segment < 1 || style.gap < 1 || style.rows < 1) throw InputError("invalid gap instance size");
  GapInstance g;
  g.width = 2 * style.segment + style.gap;
  g.height = style.rows;
  const int mid = style.rows / 2;
  const std::size_t n = static_cast<std::size_t>(g.width) * g.height;
  g.sites.dim = 2;
  g.sites.positions.resize(n);
  g.sites.lambdas.assign(n, style.lambda_off);
  g.L0.resize(n);
  g.x0.assign(n, 0);
  g.graph = build_grid_2d(g.width, g.height);
  std::mt19937_64 rng(style.seed);
  std::uniform_real_distribution<double> angle(0.0, kPi);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      const int i = y * g.width + x;
      g.sites.positions[i] = pixel_center(x, y);
      const double a = angle(rng);
      g.L0[i] = TangentLine::make(g.sites.positions[i], Vec3(std::cos(a), std::sin(a), 0.0));
      if (y != mid) continue;
      if (x < style.segment) g.segment_a.push_back(i);
      else if (x < style.segment + style.gap) g.gap.push_back(i);
      else g.segment_b.push_back(i);
    }
  for (const auto* seg : {&g.segment_a, &g.segment_b})
    for (int i : *seg) {
      g.sites.lambdas[i] = style.lambda_segment;
      g.L0[i] = TangentLine::make(g.sites.positions[i], Vec3::UnitX());
      g.x0[i] = 1;
    }
  for (int i : g.gap) g.sites.lambdas[i] = style.lambda_gap;
  return g;
}

}  // namespace thinstruct::synth
