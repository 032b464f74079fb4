#include "thinstruct/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace thinstruct {

TangentLine TangentLine::make(const Vec3& anchor, const Vec3& direction) {
  TangentLine l;
  l.anchor = anchor;
  const double n = direction.norm();
  l.direction = n > 0.0 ? Vec3(direction / n) : Vec3::UnitX();
  return l;
}

Vec3 rejection(const TangentLine& l, const Vec3& p) {
  const Vec3 v = p - l.anchor;
  return v - v.dot(l.direction) * l.direction;
}

double point_line_distance(const TangentLine& l, const Vec3& p) { return rejection(l, p).norm(); }

Vec3 project_onto_line(const TangentLine& l, const Vec3& p) {
  return l.anchor + (p - l.anchor).dot(l.direction) * l.direction;
}

double curvature_pair(const TangentLine& li, const TangentLine& lj, const Vec3& pi,
                      const Vec3& pj, CurvatureKind kind) {
  const double dij = point_line_distance(li, pj);
  const double dji = point_line_distance(lj, pi);
  const double chord = (pi - pj).norm();
  if (kind == CurvatureKind::absolute) return (dij + dji) / std::max(chord, kChordClamp);
  return (dij * dij + dji * dji) / std::max(chord * chord, kChordClamp * kChordClamp);
}

double misalignment(const TangentLine& l, const Vec3& g) {
  return (g - g.dot(l.direction) * l.direction).norm();
}

double truncated_distance(const TangentLine& l, const Vec3& p, double tau) {
  return std::max(0.0, point_line_distance(l, p) - tau);
}

}  // namespace thinstruct
