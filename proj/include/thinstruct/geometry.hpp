#pragma once

#include <Eigen/Core>

namespace thinstruct {

// Points and vectors are always stored in 3D; planar problems keep z = 0.
using Vec3 = Eigen::Vector3d;

/// Denominator clamp for the pairwise curvature term (pixels).
inline constexpr double kChordClamp = 1e-6;

/// A candidate local tangent: anchor point plus unit direction.
///
/// Directions describe lines, not rays, so every formula below is
/// invariant under direction -> -direction.
struct TangentLine {
  Vec3 anchor = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();

  /// Builds a line, normalizing `direction`. A zero direction falls back to +x.
  static TangentLine make(const Vec3& anchor, const Vec3& direction);
};

enum class CurvatureKind { absolute, squared };

struct CurvatureTerm {
  CurvatureKind kind = CurvatureKind::squared;
  double epsilon = 0.1;  // only used by the absolute-mode reweighting
};

/// Component of (p - anchor) orthogonal to the line.
Vec3 rejection(const TangentLine& l, const Vec3& p);

double point_line_distance(const TangentLine& l, const Vec3& p);

Vec3 project_onto_line(const TangentLine& l, const Vec3& p);

/// Pairwise curvature surrogate between two tangents with denoised points
/// p_i (on l_i) and p_j (on l_j).
///
/// absolute: (dist(l_i,p_j) + dist(l_j,p_i)) / max(|p_i - p_j|, kChordClamp)
/// squared:  (dist(l_i,p_j)^2 + dist(l_j,p_i)^2) / max(|p_i - p_j|^2, kChordClamp^2)
double curvature_pair(const TangentLine& li, const TangentLine& lj, const Vec3& pi,
                      const Vec3& pj, CurvatureKind kind);

/// |g| * sin(angle(l, g)); zero for g = 0.
double misalignment(const TangentLine& l, const Vec3& g);

/// max(0, dist(l, p) - tau)
double truncated_distance(const TangentLine& l, const Vec3& p, double tau);

}  // namespace thinstruct
