#pragma once

#include <array>
#include <cmath>
#include <ostream>

#include "ebrt/core/error.hpp"
#include "ebrt/geometry/vec3.hpp"

namespace ebrt::geom {

/// Row-major 3x3 matrix. Only used as the rotation block of a Transform.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  constexpr double operator()(int r, int c) const { return m[r * 3 + c]; }
  constexpr double& operator()(int r, int c) { return m[r * 3 + c]; }

  static constexpr Mat3 identity() { return {}; }

  constexpr Vec3 row(int r) const { return {m[r * 3], m[r * 3 + 1], m[r * 3 + 2]}; }
  constexpr Vec3 col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }

  constexpr Mat3 transposed() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
    return t;
  }

  constexpr Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  constexpr Mat3 operator*(const Mat3& o) const {
    Mat3 p;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        p(r, c) = (*this)(r, 0) * o(0, c) + (*this)(r, 1) * o(1, c) + (*this)(r, 2) * o(2, c);
    return p;
  }

  constexpr double determinant() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }

  /// Entry-wise absolute value; maps box half-extents through a rotation.
  Mat3 cwise_abs() const {
    Mat3 a;
    for (int i = 0; i < 9; ++i) a.m[i] = std::abs(m[i]);
    return a;
  }

  friend constexpr bool operator==(const Mat3&, const Mat3&) = default;
};

namespace detail {

// sin/cos of an angle in degrees, exact at multiples of 90 so quarter turns compose cleanly.
inline void sincos_deg(double deg, double& s, double& c) {
  const double q = deg / 90.0;
  if (q == std::floor(q) && std::abs(q) < 1e15) {
    const long long k = static_cast<long long>(q);
    switch (((k % 4) + 4) % 4) {
      case 0: s = 0.0; c = 1.0; return;
      case 1: s = 1.0; c = 0.0; return;
      case 2: s = 0.0; c = -1.0; return;
      default: s = -1.0; c = 0.0; return;
    }
  }
  const double r = deg_to_rad(deg);
  s = std::sin(r);
  c = std::cos(r);
}

}  // namespace detail

/// Rigid transform: x -> R x + t. The 4x4 homogeneous form has bottom row (0,0,0,1).
class Transform {
 public:
  constexpr Transform() = default;
  constexpr Transform(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static constexpr Transform identity() { return {}; }
  static constexpr Transform translate(double x, double y, double z) {
    return {Mat3::identity(), {x, y, z}};
  }
  static constexpr Transform translate(const Vec3& t) { return {Mat3::identity(), t}; }

  static Transform rot_x(double deg) {
    double s, c;
    detail::sincos_deg(deg, s, c);
    return {Mat3{{1, 0, 0, 0, c, -s, 0, s, c}}, {}};
  }
  static Transform rot_y(double deg) {
    double s, c;
    detail::sincos_deg(deg, s, c);
    return {Mat3{{c, 0, s, 0, 1, 0, -s, 0, c}}, {}};
  }
  static Transform rot_z(double deg) {
    double s, c;
    detail::sincos_deg(deg, s, c);
    return {Mat3{{c, -s, 0, s, c, 0, 0, 0, 1}}, {}};
  }
  /// rot_z(z) * rot_y(y) * rot_x(x), angles in degrees.
  static Transform from_euler_deg(const Vec3& deg) {
    return rot_z(deg.z) * rot_y(deg.y) * rot_x(deg.x);
  }

  /// Builds from a row-major 4x4 matrix; rejects anything that is not a proper rigid motion.
  static Transform from_matrix(const std::array<double, 16>& h, double tol = 1e-9) {
    if (h[12] != 0.0 || h[13] != 0.0 || h[14] != 0.0 || h[15] != 1.0)
      throw InvalidArgument("transform bottom row must be (0,0,0,1)");
    Mat3 r{{h[0], h[1], h[2], h[4], h[5], h[6], h[8], h[9], h[10]}};
    const Vec3 t{h[3], h[7], h[11]};
    for (double v : h)
      if (!std::isfinite(v)) throw InvalidArgument("transform entries must be finite");
    const Mat3 rtr = r.transposed() * r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (std::abs(rtr(i, j) - (i == j ? 1.0 : 0.0)) > tol)
          throw InvalidArgument("transform rotation block is not orthonormal");
    if (r.determinant() <= 0.0) throw InvalidArgument("transform rotation has det != +1");
    return {r, t};
  }

  constexpr const Mat3& rotation() const { return rotation_; }
  constexpr const Vec3& translation() const { return translation_; }

  std::array<double, 16> matrix() const {
    const auto& r = rotation_;
    return {r(0, 0), r(0, 1), r(0, 2), translation_.x, r(1, 0), r(1, 1), r(1, 2), translation_.y,
            r(2, 0), r(2, 1), r(2, 2), translation_.z, 0.0,     0.0,     0.0,     1.0};
  }

  constexpr Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  constexpr Vec3 rotate(const Vec3& v) const { return rotation_ * v; }

  /// Matrix product this * o: applies o first, then this.
  constexpr Transform operator*(const Transform& o) const {
    return {rotation_ * o.rotation_, rotation_ * o.translation_ + translation_};
  }

  /// Rigid inverse (R^T, -R^T t).
  constexpr Transform inverse() const {
    const Mat3 rt = rotation_.transposed();
    return {rt, -(rt * translation_)};
  }

  friend constexpr bool operator==(const Transform&, const Transform&) = default;

 private:
  Mat3 rotation_{};
  Vec3 translation_{};
};

constexpr Transform compose(const Transform& a, const Transform& b) { return a * b; }
constexpr Transform invert(const Transform& t) { return t.inverse(); }
constexpr Vec3 apply(const Transform& t, const Vec3& p) { return t.apply(p); }

/// Largest absolute entry difference between the 4x4 forms.
inline double max_abs_diff(const Transform& a, const Transform& b) {
  const auto ma = a.matrix();
  const auto mb = b.matrix();
  double d = 0.0;
  for (std::size_t i = 0; i < 16; ++i) d = std::max(d, std::abs(ma[i] - mb[i]));
  return d;
}

inline bool lexicographic_less(const Transform& a, const Transform& b) {
  const auto ma = a.matrix();
  const auto mb = b.matrix();
  for (std::size_t i = 0; i < 12; ++i)
    if (ma[i] != mb[i]) return ma[i] < mb[i];
  return false;
}

inline std::ostream& operator<<(std::ostream& os, const Transform& t) {
  const auto m = t.matrix();
  os << '[';
  for (int r = 0; r < 3; ++r) {
    os << (r ? "; " : "");
    for (int c = 0; c < 4; ++c) os << (c ? " " : "") << m[r * 4 + c];
  }
  return os << ']';
}

}  // namespace ebrt::geom
