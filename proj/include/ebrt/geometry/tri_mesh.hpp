#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ebrt/core/error.hpp"
#include "ebrt/geometry/transform.hpp"
#include "ebrt/geometry/vec3.hpp"

namespace ebrt::geom {

/// A triangle as three points in some common frame.
using Triangle = std::array<Vec3, 3>;
using TriIndex = std::array<std::uint32_t, 3>;

/// Triangles below this area (mm^2) are treated as degenerate.
inline constexpr double kDegenerateArea = 1e-12;

inline double triangle_area(const Triangle& t) {
  return 0.5 * norm(cross(t[1] - t[0], t[2] - t[0]));
}

inline bool is_degenerate(const Triangle& t) { return !(triangle_area(t) >= kDegenerateArea); }

/// Indexed triangle surface. Immutable once built; every index is in range and no triangle
/// is degenerate.
class TriMesh {
 public:
  TriMesh() = default;

  TriMesh(std::vector<Vec3> vertices, std::vector<TriIndex> triangles, std::string name = {})
      : vertices_(std::move(vertices)), triangles_(std::move(triangles)), name_(std::move(name)) {
    for (const auto& v : vertices_)
      if (!is_finite(v)) throw InvalidArgument("mesh '" + name_ + "' has a non-finite vertex");
    const auto n = vertices_.size();
    for (std::size_t i = 0; i < triangles_.size(); ++i) {
      const auto& t = triangles_[i];
      if (t[0] >= n || t[1] >= n || t[2] >= n)
        throw InvalidArgument("mesh '" + name_ + "' triangle " + std::to_string(i) +
                              " has an index out of range");
      if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2] || is_degenerate(triangle(i)))
        throw DegenerateTriangle("mesh '" + name_ + "' triangle " + std::to_string(i) +
                                 " is degenerate");
    }
  }

  /// Welds vertices at identical positions, then drops triangles that collapse or fall below
  /// the degeneracy threshold. Use for generated data (isosurfaces, decimation, STL import).
  static TriMesh cleaned(const std::vector<Vec3>& vertices, const std::vector<TriIndex>& triangles,
                         std::string name = {}) {
    std::map<std::array<double, 3>, std::uint32_t> index_of;
    std::vector<std::uint32_t> remap(vertices.size());
    std::vector<Vec3> out_vertices;
    // Only vertices referenced by a triangle survive.
    std::vector<char> used(vertices.size(), 0);
    for (const auto& t : triangles)
      for (auto i : t) {
        if (i >= vertices.size()) throw InvalidArgument("triangle index out of range");
        used[i] = 1;
      }
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      if (!used[i]) continue;
      const auto& v = vertices[i];
      auto [it, inserted] = index_of.try_emplace({v.x, v.y, v.z},
                                                 static_cast<std::uint32_t>(out_vertices.size()));
      if (inserted) out_vertices.push_back(v);
      remap[i] = it->second;
    }
    std::vector<TriIndex> out_triangles;
    out_triangles.reserve(triangles.size());
    for (const auto& t : triangles) {
      const TriIndex r{remap[t[0]], remap[t[1]], remap[t[2]]};
      if (r[0] == r[1] || r[1] == r[2] || r[0] == r[2]) continue;
      if (is_degenerate({out_vertices[r[0]], out_vertices[r[1]], out_vertices[r[2]]})) continue;
      out_triangles.push_back(r);
    }
    return compacted(std::move(out_vertices), std::move(out_triangles), std::move(name));
  }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<TriIndex>& triangles() const { return triangles_; }
  const std::string& name() const { return name_; }
  std::size_t triangle_count() const { return triangles_.size(); }
  std::size_t vertex_count() const { return vertices_.size(); }
  bool empty() const { return triangles_.empty(); }

  Triangle triangle(std::size_t i) const {
    const auto& t = triangles_[i];
    return {vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]};
  }

  TriMesh transformed(const Transform& t) const {
    TriMesh out = *this;
    for (auto& v : out.vertices_) v = t.apply(v);
    return out;
  }

  TriMesh renamed(std::string name) const {
    TriMesh out = *this;
    out.name_ = std::move(name);
    return out;
  }

  /// Concatenates meshes into one (no welding across parts).
  static TriMesh merged(std::span<const TriMesh> parts, std::string name = {}) {
    std::vector<Vec3> v;
    std::vector<TriIndex> t;
    for (const auto& p : parts) {
      const auto base = static_cast<std::uint32_t>(v.size());
      v.insert(v.end(), p.vertices_.begin(), p.vertices_.end());
      for (const auto& tri : p.triangles_) t.push_back({tri[0] + base, tri[1] + base, tri[2] + base});
    }
    return TriMesh(std::move(v), std::move(t), std::move(name));
  }

  /// Drops unreferenced vertices and renumbers.
  static TriMesh compacted(std::vector<Vec3> vertices, std::vector<TriIndex> triangles,
                           std::string name = {}) {
    constexpr auto kUnset = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> remap(vertices.size(), kUnset);
    std::vector<Vec3> out;
    for (auto& t : triangles)
      for (auto& i : t) {
        if (remap[i] == kUnset) {
          remap[i] = static_cast<std::uint32_t>(out.size());
          out.push_back(vertices[i]);
        }
        i = remap[i];
      }
    return TriMesh(std::move(out), std::move(triangles), std::move(name));
  }

 private:
  std::vector<Vec3> vertices_;
  std::vector<TriIndex> triangles_;
  std::string name_;
};

/// Axis-aligned box. A default-constructed box is empty (min > max) until extended.
struct Aabb {
  Vec3 min{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity()};
  Vec3 max{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity()};

  bool is_empty() const { return min.x > max.x || min.y > max.y || min.z > max.z; }
  void extend(const Vec3& p) {
    min = cwise_min(min, p);
    max = cwise_max(max, p);
  }
  void extend(const Aabb& b) {
    min = cwise_min(min, b.min);
    max = cwise_max(max, b.max);
  }
  Vec3 center() const { return (min + max) * 0.5; }
  Vec3 half_extents() const { return (max - min) * 0.5; }
  Vec3 extents() const { return max - min; }
  int longest_axis() const {
    const Vec3 e = extents();
    if (e.x >= e.y && e.x >= e.z) return 0;
    return e.y >= e.z ? 1 : 2;
  }
  bool contains(const Aabb& b, double tol = 0.0) const {
    return b.min.x >= min.x - tol && b.min.y >= min.y - tol && b.min.z >= min.z - tol &&
           b.max.x <= max.x + tol && b.max.y <= max.y + tol && b.max.z <= max.z + tol;
  }
  bool contains(const Vec3& p, double tol = 0.0) const {
    return p.x >= min.x - tol && p.y >= min.y - tol && p.z >= min.z - tol && p.x <= max.x + tol &&
           p.y <= max.y + tol && p.z <= max.z + tol;
  }
  Aabb inflated(double d) const { return {min - Vec3{d, d, d}, max + Vec3{d, d, d}}; }

  static Aabb of(const Triangle& t) {
    Aabb b;
    for (const auto& p : t) b.extend(p);
    return b;
  }
};

/// Euclidean distance between two boxes; 0 when they touch or overlap.
inline double aabb_distance(const Aabb& a, const Aabb& b) {
  const double dx = std::max({0.0, a.min.x - b.max.x, b.min.x - a.max.x});
  const double dy = std::max({0.0, a.min.y - b.max.y, b.min.y - a.max.y});
  const double dz = std::max({0.0, a.min.z - b.max.z, b.min.z - a.max.z});
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Oriented box: columns of `axes` are the box axes expressed in the enclosing frame.
struct Obb {
  Vec3 center;
  Vec3 half_extents;
  Mat3 axes;

  Obb transformed(const Transform& t) const {
    return {t.apply(center), half_extents, t.rotation() * axes};
  }

  std::array<Vec3, 8> corners() const {
    std::array<Vec3, 8> c;
    for (int i = 0; i < 8; ++i) {
      const double sx = (i & 1) ? 1.0 : -1.0;
      const double sy = (i & 2) ? 1.0 : -1.0;
      const double sz = (i & 4) ? 1.0 : -1.0;
      c[i] = center + axes.col(0) * (sx * half_extents.x) + axes.col(1) * (sy * half_extents.y) +
             axes.col(2) * (sz * half_extents.z);
    }
    return c;
  }

  double volume() const { return 8.0 * half_extents.x * half_extents.y * half_extents.z; }

  /// Closed 12-triangle surface of the box, outward wound.
  TriMesh to_mesh(std::string name = {}) const {
    const auto c = corners();
    std::vector<Vec3> v(c.begin(), c.end());
    // Corner bit layout: bit0 = +x, bit1 = +y, bit2 = +z.
    std::vector<TriIndex> t{{0, 2, 3}, {0, 3, 1},  // -z
                            {4, 5, 7}, {4, 7, 6},  // +z
                            {0, 1, 5}, {0, 5, 4},  // -y
                            {2, 6, 7}, {2, 7, 3},  // +y
                            {0, 4, 6}, {0, 6, 2},  // -x
                            {1, 3, 7}, {1, 7, 5}};  // +x
    return TriMesh(std::move(v), std::move(t), std::move(name));
  }
};

/// Tight axis-aligned bound of the mesh vertices after applying `t`.
inline Aabb mesh_aabb(const TriMesh& m, const Transform& t = Transform::identity()) {
  if (m.empty()) throw InvalidArgument("mesh_aabb: empty mesh");
  Aabb b;
  for (const auto& tri : m.triangles())
    for (auto i : tri) b.extend(t.apply(m.vertices()[i]));
  return b;
}

inline double surface_area(const TriMesh& m) {
  double a = 0.0;
  for (std::size_t i = 0; i < m.triangle_count(); ++i) a += triangle_area(m.triangle(i));
  return a;
}

/// Signed enclosed volume (divergence theorem); positive for outward-wound closed meshes.
inline double signed_volume(const TriMesh& m) {
  double v = 0.0;
  for (std::size_t i = 0; i < m.triangle_count(); ++i) {
    const auto t = m.triangle(i);
    v += dot(t[0], cross(t[1], t[2]));
  }
  return v / 6.0;
}

inline Vec3 triangle_normal(const Triangle& t) { return cross(t[1] - t[0], t[2] - t[0]); }

}  // namespace ebrt::geom
