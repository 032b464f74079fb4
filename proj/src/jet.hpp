#pragma once

// Forward-mode dual numbers with a fixed number of derivative directions,
// plus a tiny 3-vector over any scalar. Internal to the solver.

#include <array>
#include <cmath>

namespace thinstruct::detail {

template <int N>
struct Jet {
  double a = 0.0;
  std::array<double, N> v{};

  Jet() = default;
  explicit Jet(double value) : a(value) {}
  static Jet variable(double value, int k) {
    Jet j(value);
    j.v[k] = 1.0;
    return j;
  }
};

template <int N>
inline Jet<N> operator+(const Jet<N>& x, const Jet<N>& y) {
  Jet<N> r(x.a + y.a);
  for (int k = 0; k < N; ++k) r.v[k] = x.v[k] + y.v[k];
  return r;
}
template <int N>
inline Jet<N> operator-(const Jet<N>& x, const Jet<N>& y) {
  Jet<N> r(x.a - y.a);
  for (int k = 0; k < N; ++k) r.v[k] = x.v[k] - y.v[k];
  return r;
}
template <int N>
inline Jet<N> operator-(const Jet<N>& x) {
  Jet<N> r(-x.a);
  for (int k = 0; k < N; ++k) r.v[k] = -x.v[k];
  return r;
}
template <int N>
inline Jet<N> operator*(const Jet<N>& x, const Jet<N>& y) {
  Jet<N> r(x.a * y.a);
  for (int k = 0; k < N; ++k) r.v[k] = x.a * y.v[k] + y.a * x.v[k];
  return r;
}
template <int N>
inline Jet<N> operator/(const Jet<N>& x, const Jet<N>& y) {
  const double inv = 1.0 / y.a;
  const double q = x.a / y.a;
  Jet<N> r(q);
  for (int k = 0; k < N; ++k) r.v[k] = (x.v[k] - q * y.v[k]) * inv;
  return r;
}
template <int N>
inline Jet<N> operator+(const Jet<N>& x, double s) {
  Jet<N> r = x;
  r.a += s;
  return r;
}
template <int N>
inline Jet<N> operator-(const Jet<N>& x, double s) {
  Jet<N> r = x;
  r.a -= s;
  return r;
}
template <int N>
inline Jet<N> operator*(const Jet<N>& x, double s) {
  Jet<N> r(x.a * s);
  for (int k = 0; k < N; ++k) r.v[k] = x.v[k] * s;
  return r;
}
template <int N>
inline Jet<N> operator*(double s, const Jet<N>& x) {
  return x * s;
}
template <int N>
inline Jet<N> operator/(const Jet<N>& x, double s) {
  Jet<N> r(x.a / s);
  for (int k = 0; k < N; ++k) r.v[k] = x.v[k] / s;
  return r;
}

template <int N>
inline Jet<N> sqrt(const Jet<N>& x) {
  const double s = std::sqrt(x.a);
  Jet<N> r(s);
  const double h = 0.5 / s;
  for (int k = 0; k < N; ++k) r.v[k] = x.v[k] * h;
  return r;
}
template <int N>
inline Jet<N> sin(const Jet<N>& x) {
  Jet<N> r(std::sin(x.a));
  const double c = std::cos(x.a);
  for (int k = 0; k < N; ++k) r.v[k] = x.v[k] * c;
  return r;
}
template <int N>
inline Jet<N> cos(const Jet<N>& x) {
  Jet<N> r(std::cos(x.a));
  const double s = -std::sin(x.a);
  for (int k = 0; k < N; ++k) r.v[k] = x.v[k] * s;
  return r;
}

inline double value_of(double x) { return x; }
template <int N>
inline double value_of(const Jet<N>& x) {
  return x.a;
}

template <class T>
struct V3 {
  T x, y, z;
};

template <class T>
inline V3<T> operator+(const V3<T>& a, const V3<T>& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}
template <class T>
inline V3<T> operator-(const V3<T>& a, const V3<T>& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}
template <class T, class S>
inline V3<T> scale(const V3<T>& a, const S& s) {
  return {a.x * s, a.y * s, a.z * s};
}
template <class T>
inline T dot(const V3<T>& a, const V3<T>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

}  // namespace thinstruct::detail
