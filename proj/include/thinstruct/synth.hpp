#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "thinstruct/energy.hpp"
#include "thinstruct/pipelines.hpp"

namespace thinstruct::synth {

/// Image plus the binary mask of pixels the true boundary passes through.
struct SyntheticImage {
  GrayImage image;
  std::vector<std::uint8_t> truth;  // width * height
};

struct ImageStyle {
  double background = 50.0;
  double foreground = 200.0;
  double noise = 0.0;  // std of additive Gaussian noise, intensity units
  int supersample = 8;
  bool quantize = true;  // round and clamp to 8 bits
  std::uint64_t seed = 0;
};

SyntheticImage disk(int width, int height, double cx, double cy, double radius, const ImageStyle& style = {});
/// Filled polygon (vertices in pixel coordinates, either orientation).
SyntheticImage polygon(int width, int height, const std::vector<Vec3>& vertices, const ImageStyle& style = {});
/// Vertical step edge at x = edge_x, foreground on the right.
SyntheticImage step_edge(int width, int height, double edge_x, const ImageStyle& style = {});
/// Two bright bars of `length` px whose top edges are collinear, `gap` px apart.
SyntheticImage gap_image(int length, int gap, const ImageStyle& style = {});

void add_noise(GrayImage& image, double sigma, std::uint64_t seed);

/// Points on a curve with true unit tangents.
struct CurveSamples {
  std::vector<Vec3> points;
  std::vector<Vec3> tangents;
};

CurveSamples circle(double radius, int samples, double noise = 0.0, std::uint64_t seed = 0);
CurveSamples line(double length, int samples, double noise = 0.0, std::uint64_t seed = 0);
/// Axis-aligned square of side `side` with `per_side` samples per side,
/// none on the corners (offset half a spacing).
CurveSamples square(double side, int per_side, double noise = 0.0, std::uint64_t seed = 0);
/// Square with circular corners of radius `corner`, sampled uniformly by arc length.
CurveSamples rounded_square(double side, double corner, int samples, double noise = 0.0, std::uint64_t seed = 0);

enum class TubeShape { helix, straight, y_junction };

struct SyntheticVessels {
  VesselField field;
  std::vector<Vec3> truth_tangent;   // per voxel: tangent of the nearest curve point
  std::vector<float> truth_distance;  // per voxel: distance to the curve
  std::vector<Vec3> curve;            // dense center-line samples
  std::vector<Vec3> curve_tangent;
};

struct TubeStyle {
  int size = 64;
  double tube_radius = 2.0;  // written to the sigma plane
  double direction_noise_deg = 0.0;
  std::uint64_t seed = 0;
};

SyntheticVessels tube(TubeShape shape, const TubeStyle& style = {});

/// Fig. 6 style instance built directly on an 8-connected grid: two collinear
/// runs of strong evidence on the middle row separated by weak evidence.
struct GapInstance {
  int width = 0, height = 0;
  SiteSet sites;
  NeighborGraph graph;
  Tangents L0;
  Labeling x0;
  std::vector<int> segment_a, segment_b, gap;  // site ids on the middle row
};

struct GapStyle {
  int segment = 10;
  int gap = 8;
  int rows = 7;
  double lambda_segment = -2.0;
  double lambda_gap = 0.1;
  double lambda_off = 1.8;
  std::uint64_t seed = 1;
};

GapInstance gap_instance(const GapStyle& style = {});

TubeShape parse_tube_shape(const std::string& name);

}  // namespace thinstruct::synth
