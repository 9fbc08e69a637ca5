#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <utility>

#include "ebrt/core/error.hpp"
#include "ebrt/geometry/tri_mesh.hpp"
#include "ebrt/geometry/vec3.hpp"

namespace ebrt::geom {

/// Separations below this (mm) count as contact.
inline constexpr double kContactTolerance = 1e-6;

/// Closest point to `p` on the closed triangle (a, b, c). Voronoi-region walk.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = dot(ab, ap);
  const double d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp);
  const double d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));

  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp);
  const double d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

inline Vec3 closest_point_on_triangle(const Vec3& p, const Triangle& t) {
  return closest_point_on_triangle(p, t[0], t[1], t[2]);
}

inline double point_triangle_distance(const Vec3& p, const Triangle& t) {
  return distance(p, closest_point_on_triangle(p, t));
}

/// Closest points between segments [p1,q1] and [p2,q2].
inline std::pair<Vec3, Vec3> closest_points_segments(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                                                     const Vec3& q2) {
  const Vec3 d1 = q1 - p1;
  const Vec3 d2 = q2 - p2;
  const Vec3 r = p1 - p2;
  const double a = dot(d1, d1);
  const double e = dot(d2, d2);
  const double f = dot(d2, r);
  double s = 0.0;
  double t = 0.0;
  constexpr double kTiny = 1e-300;
  if (a <= kTiny && e <= kTiny) return {p1, p2};
  if (a <= kTiny) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = dot(d1, r);
    if (e <= kTiny) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = dot(d1, d2);
      const double denom = a * e - b * b;
      // Near-parallel: any s works, the clamping below recovers the true closest pair.
      if (denom > 1e-14 * a * e) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return {p1 + d1 * s, p2 + d2 * t};
}

/// Result of a triangle-triangle proximity query. When the triangles touch, distance is 0
/// and both witness points are the same contact point.
struct TriDistance {
  double distance = std::numeric_limits<double>::infinity();
  Vec3 on_first;
  Vec3 on_second;
};

namespace detail {

// If an edge of `a` crosses the plane of `b` strictly and the crossing lies in `b`, returns true
// and the crossing point.
inline bool edge_pierces(const Triangle& a, const Triangle& b, Vec3& hit) {
  const Vec3 n = triangle_normal(b);
  for (int i = 0; i < 3; ++i) {
    const Vec3& p = a[i];
    const Vec3& q = a[(i + 1) % 3];
    const double dp = dot(n, p - b[0]);
    const double dq = dot(n, q - b[0]);
    if (!((dp > 0.0 && dq < 0.0) || (dp < 0.0 && dq > 0.0))) continue;
    const Vec3 x = p + (q - p) * (dp / (dp - dq));
    bool inside = true;
    for (int k = 0; k < 3 && inside; ++k) {
      const Vec3& u = b[k];
      const Vec3& w = b[(k + 1) % 3];
      inside = dot(cross(w - u, x - u), n) >= 0.0;
    }
    if (inside) {
      hit = x;
      return true;
    }
  }
  return false;
}

// Exact minimum distance between two closed triangles. The minimum of two disjoint triangles
// is attained on an edge/edge or vertex/face feature pair; touching triangles either share such
// a feature at distance 0 or have an edge piercing the other's interior.
inline TriDistance tri_tri_closest_ordered(const Triangle& a, const Triangle& b) {
  Vec3 hit;
  if (edge_pierces(a, b, hit) || edge_pierces(b, a, hit)) return {0.0, hit, hit};

  TriDistance best;
  double best2 = std::numeric_limits<double>::infinity();
  auto consider = [&](const Vec3& pa, const Vec3& pb) {
    const double d2 = norm2(pa - pb);
    if (d2 < best2) {
      best2 = d2;
      best.on_first = pa;
      best.on_second = pb;
    }
  };
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const auto [pa, pb] =
          closest_points_segments(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3]);
      consider(pa, pb);
    }
  for (int i = 0; i < 3; ++i) {
    consider(a[i], closest_point_on_triangle(a[i], b));
    consider(closest_point_on_triangle(b[i], a), b[i]);
  }
  best.distance = std::sqrt(best2);
  return best;
}

inline bool lexicographic_less(const Triangle& a, const Triangle& b) {
  for (int i = 0; i < 3; ++i) {
    if (a[i] != b[i]) return geom::lexicographic_less(a[i], b[i]);
  }
  return false;
}

// Unchecked, order-independent: the computation always runs on a canonical operand order so
// d(a, b) and d(b, a) are bitwise identical.
inline TriDistance tri_tri_closest(const Triangle& a, const Triangle& b) {
  if (lexicographic_less(b, a)) {
    TriDistance r = tri_tri_closest_ordered(b, a);
    std::swap(r.on_first, r.on_second);
    return r;
  }
  return tri_tri_closest_ordered(a, b);
}

// Cheap rejection: every vertex of `b` farther than `margin` on one side of the plane of `a`.
inline bool separated_by_plane(const Triangle& a, const Triangle& b, double margin) {
  const Vec3 n = triangle_normal(a);
  const double len = norm(n);
  const double d0 = dot(n, b[0] - a[0]);
  const double d1 = dot(n, b[1] - a[0]);
  const double d2 = dot(n, b[2] - a[0]);
  const double m = margin * len;
  return (d0 > m && d1 > m && d2 > m) || (d0 < -m && d1 < -m && d2 < -m);
}

}  // namespace detail

inline void require_proper(const Triangle& t, const char* what) {
  if (is_degenerate(t)) throw DegenerateTriangle(std::string(what) + ": degenerate triangle");
}

/// Closest points and distance between two closed triangles.
inline TriDistance tri_tri_closest(const Triangle& a, const Triangle& b) {
  require_proper(a, "tri_tri_closest");
  require_proper(b, "tri_tri_closest");
  return detail::tri_tri_closest(a, b);
}

inline double tri_tri_min_distance(const Triangle& a, const Triangle& b) {
  return tri_tri_closest(a, b).distance;
}

/// True iff the closed triangles share a point (up to the contact tolerance).
inline bool tri_tri_intersect(const Triangle& a, const Triangle& b) {
  require_proper(a, "tri_tri_intersect");
  require_proper(b, "tri_tri_intersect");
  if (detail::separated_by_plane(a, b, kContactTolerance) ||
      detail::separated_by_plane(b, a, kContactTolerance))
    return false;
  return detail::tri_tri_closest(a, b).distance < kContactTolerance;
}

}  // namespace ebrt::geom
