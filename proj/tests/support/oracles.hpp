#pragma once

// Independent reference computations used by the tests. Nothing here goes through the BVH or
// the library's closest-feature code paths.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "ebrt/geometry/transform.hpp"
#include "ebrt/geometry/tri_mesh.hpp"
#include "ebrt/geometry/triangle.hpp"

namespace ebrt::testing {

using geom::Transform;
using geom::Triangle;
using geom::TriMesh;
using geom::Vec3;

inline Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

inline Transform random_transform(std::mt19937_64& rng, double max_translation = 100.0) {
  std::uniform_real_distribution<double> ang(-180.0, 180.0);
  const auto r = Transform::rot_z(ang(rng)) * Transform::rot_y(ang(rng)) * Transform::rot_x(ang(rng));
  return Transform::translate(random_vec(rng, -max_translation, max_translation)) * r;
}

inline Triangle random_triangle(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  for (;;) {
    Triangle t{random_vec(rng, lo, hi), random_vec(rng, lo, hi), random_vec(rng, lo, hi)};
    if (geom::triangle_area(t) > 1e-3 * (hi - lo) * (hi - lo)) return t;
  }
}

inline Vec3 barycentric_point(const Triangle& t, double u, double v) {
  return t[0] * (1.0 - u - v) + t[1] * u + t[2] * v;
}

/// Minimum pairwise distance over barycentric grids on both triangles, refined around the best
/// sample. Squared distance is convex in the barycentric coordinates, so zooming in on the best
/// grid sample converges to the global minimum.
inline double sampled_triangle_distance(const Triangle& a, const Triangle& b, int n = 24, int rounds = 30) {
  double cu[2] = {1.0 / 3, 1.0 / 3};
  double cv[2] = {1.0 / 3, 1.0 / 3};
  double radius = 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (int round = 0; round < rounds; ++round) {
    std::vector<std::pair<double, double>> sa, sb;
    for (int k = 0; k < 2; ++k) {
      auto& s = k == 0 ? sa : sb;
      for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
          const double u = std::clamp(cu[k] + radius * (2.0 * i / n - 1.0), 0.0, 1.0);
          const double v = std::clamp(cv[k] + radius * (2.0 * j / n - 1.0), 0.0, 1.0);
          if (u + v > 1.0) {
            const double excess = (u + v - 1.0) / 2.0;
            s.emplace_back(u - excess, v - excess);
          } else {
            s.emplace_back(u, v);
          }
        }
    }
    double round_best = std::numeric_limits<double>::infinity();
    std::pair<double, double> ba, bb;
    for (const auto& [ua, va] : sa) {
      const Vec3 pa = barycentric_point(a, ua, va);
      for (const auto& [ub, vb] : sb) {
        const double d = geom::norm2(pa - barycentric_point(b, ub, vb));
        if (d < round_best) {
          round_best = d;
          ba = {ua, va};
          bb = {ub, vb};
        }
      }
    }
    best = std::min(best, std::sqrt(round_best));
    cu[0] = ba.first;
    cv[0] = ba.second;
    cu[1] = bb.first;
    cv[1] = bb.second;
    radius *= 0.5;
  }
  return best;
}

/// True if `p` lies in the closed triangle (coplanar check with tolerance).
inline bool point_in_triangle(const Vec3& p, const Triangle& t, double tol) {
  const Vec3 n = geom::triangle_normal(t);
  const double len = geom::norm(n);
  if (std::abs(geom::dot(n, p - t[0])) > tol * len) return false;
  for (int k = 0; k < 3; ++k) {
    const Vec3& u = t[k];
    const Vec3& w = t[(k + 1) % 3];
    if (geom::dot(geom::cross(w - u, p - u), n) < -tol * len * geom::norm(w - u)) return false;
  }
  return true;
}

/// Dense sampling of the edges of `a`; returns true if some sample lies on `b` (within tol).
inline bool sampled_edge_contact(const Triangle& a, const Triangle& b, int samples, double tol) {
  for (int e = 0; e < 3; ++e)
    for (int s = 0; s <= samples; ++s) {
      const double t = static_cast<double>(s) / samples;
      const Vec3 p = a[e] * (1.0 - t) + a[(e + 1) % 3] * t;
      if (point_in_triangle(p, b, tol)) return true;
    }
  return false;
}

inline std::vector<Triangle> world_triangles(const TriMesh& m, const Transform& t) {
  std::vector<Triangle> out;
  out.reserve(m.triangle_count());
  for (std::size_t i = 0; i < m.triangle_count(); ++i) {
    const auto tri = m.triangle(i);
    out.push_back({t.apply(tri[0]), t.apply(tri[1]), t.apply(tri[2])});
  }
  return out;
}

/// O(n*m) boolean: any triangle pair intersecting.
inline bool brute_force_intersect(const std::vector<Triangle>& a, const std::vector<Triangle>& b) {
  for (const auto& ta : a)
    for (const auto& tb : b)
      if (geom::tri_tri_intersect(ta, tb)) return true;
  return false;
}

/// O(n*m) minimum over triangle pairs.
inline double brute_force_distance(const std::vector<Triangle>& a, const std::vector<Triangle>& b) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ta : a)
    for (const auto& tb : b) best = std::min(best, geom::tri_tri_min_distance(ta, tb));
  return best;
}

inline double brute_force_point_mesh(const Vec3& p, const TriMesh& m) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.triangle_count(); ++i)
    best = std::min(best, geom::point_triangle_distance(p, m.triangle(i)));
  return best;
}

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const double t = std::clamp(geom::dot(p - a, d) / geom::dot(d, d), 0.0, 1.0);
  return geom::norm(p - (a + d * t));
}

/// Plane projection when it lands inside, otherwise the nearest edge.
inline double plane_point_triangle_distance(const Vec3& p, const Triangle& t) {
  const Vec3 n = geom::normalized(geom::cross(t[1] - t[0], t[2] - t[0]));
  const double h = geom::dot(p - t[0], n);
  const Vec3 q = p - n * h;
  bool inside = true;
  for (int k = 0; k < 3; ++k)
    if (geom::dot(geom::cross(t[(k + 1) % 3] - t[k], q - t[k]), n) < 0.0) inside = false;
  if (inside) return std::abs(h);
  return std::min({point_segment_distance(p, t[0], t[1]), point_segment_distance(p, t[1], t[2]),
                   point_segment_distance(p, t[2], t[0])});
}

/// One-sided Hausdorff estimate: vertices and centroids of `from` against all of `to`.
inline double sampled_hausdorff_one_sided(const TriMesh& from, const TriMesh& to) {
  std::vector<Vec3> samples = from.vertices();
  for (std::size_t i = 0; i < from.triangle_count(); ++i) {
    const auto t = from.triangle(i);
    samples.push_back((t[0] + t[1] + t[2]) / 3.0);
  }
  std::vector<Triangle> tris;
  for (std::size_t i = 0; i < to.triangle_count(); ++i) tris.push_back(to.triangle(i));
  double worst = 0.0;
  for (const auto& p : samples) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : tris) best = std::min(best, plane_point_triangle_distance(p, t));
    worst = std::max(worst, best);
  }
  return worst;
}

inline double sampled_hausdorff(const TriMesh& a, const TriMesh& b) {
  return std::max(sampled_hausdorff_one_sided(a, b), sampled_hausdorff_one_sided(b, a));
}

/// Divergence-theorem volume, written out independently of the library.
inline double enclosed_volume(const TriMesh& m) {
  double v = 0.0;
  for (std::size_t i = 0; i < m.triangle_count(); ++i) {
    const auto t = m.triangle(i);
    v += t[0].x * (t[1].y * t[2].z - t[2].y * t[1].z) - t[1].x * (t[0].y * t[2].z - t[2].y * t[0].z) +
         t[2].x * (t[0].y * t[1].z - t[1].y * t[0].z);
  }
  return v / 6.0;
}

inline double total_area(const TriMesh& m) {
  double a = 0.0;
  for (std::size_t i = 0; i < m.triangle_count(); ++i) {
    const auto t = m.triangle(i);
    const Vec3 u = t[1] - t[0];
    const Vec3 w = t[2] - t[0];
    const double cx = u.y * w.z - u.z * w.y, cy = u.z * w.x - u.x * w.z, cz = u.x * w.y - u.y * w.x;
    a += 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
  }
  return a;
}

}  // namespace ebrt::testing
