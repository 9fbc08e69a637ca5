#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "ebrt/core/error.hpp"
#include "ebrt/geometry/tri_mesh.hpp"

// Procedural, watertight, outward-wound meshes used for machine components, attachments and
// phantoms. `max_edge` bounds the tessellation edge length in mm.

namespace ebrt::geom {

namespace detail {

inline int segments_for(double length, double max_edge, int min_segments = 1) {
  if (!(max_edge > 0.0)) throw InvalidArgument("tessellation edge length must be positive");
  return std::max(min_segments, static_cast<int>(std::ceil(length / max_edge - 1e-9)));
}

class MeshBuilder {
 public:
  std::uint32_t vertex(const Vec3& p) {
    auto [it, inserted] =
        index_.try_emplace({p.x, p.y, p.z}, static_cast<std::uint32_t>(vertices_.size()));
    if (inserted) vertices_.push_back(p);
    return it->second;
  }
  void triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c) { triangles_.push_back({a, b, c}); }
  void quad(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d) {
    triangle(a, b, c);
    triangle(a, c, d);
  }
  TriMesh build(std::string name) && {
    return TriMesh(std::move(vertices_), std::move(triangles_), std::move(name));
  }

 private:
  std::map<std::array<double, 3>, std::uint32_t> index_;
  std::vector<Vec3> vertices_;
  std::vector<TriIndex> triangles_;
};

inline double lerp(double a, double b, int i, int n) {
  if (i == 0) return a;
  if (i == n) return b;
  return a + (b - a) * (static_cast<double>(i) / n);
}

}  // namespace detail

/// Axis-aligned box [min, max], faces subdivided into a grid no coarser than `max_edge`.
inline TriMesh make_box(const Vec3& min, const Vec3& max, double max_edge, std::string name = {}) {
  if (!(max.x > min.x && max.y > min.y && max.z > min.z))
    throw InvalidArgument("make_box: max must exceed min on every axis");
  const int nx = detail::segments_for(max.x - min.x, max_edge);
  const int ny = detail::segments_for(max.y - min.y, max_edge);
  const int nz = detail::segments_for(max.z - min.z, max_edge);
  const int n[3] = {nx, ny, nz};
  detail::MeshBuilder mb;
  auto coord = [&](int axis, int i) { return detail::lerp(min[axis], max[axis], i, n[axis]); };
  // For each face: fixed axis, side, and the two in-plane axes ordered so (u x v) is outward.
  struct Face {
    int fixed;
    bool high;
    int u;
    int v;
  };
  const Face faces[6] = {{0, false, 2, 1}, {0, true, 1, 2}, {1, false, 0, 2},
                         {1, true, 2, 0},  {2, false, 1, 0}, {2, true, 0, 1}};
  for (const auto& f : faces) {
    const double fixed_value = f.high ? max[f.fixed] : min[f.fixed];
    std::vector<std::uint32_t> ids((n[f.u] + 1) * (n[f.v] + 1));
    for (int i = 0; i <= n[f.u]; ++i)
      for (int j = 0; j <= n[f.v]; ++j) {
        Vec3 p;
        p[f.fixed] = fixed_value;
        p[f.u] = coord(f.u, i);
        p[f.v] = coord(f.v, j);
        ids[i * (n[f.v] + 1) + j] = mb.vertex(p);
      }
    for (int i = 0; i < n[f.u]; ++i)
      for (int j = 0; j < n[f.v]; ++j) {
        const auto a = ids[i * (n[f.v] + 1) + j];
        const auto b = ids[(i + 1) * (n[f.v] + 1) + j];
        const auto c = ids[(i + 1) * (n[f.v] + 1) + j + 1];
        const auto d = ids[i * (n[f.v] + 1) + j + 1];
        mb.quad(a, b, c, d);
      }
  }
  return std::move(mb).build(std::move(name));
}

/// Closed cylinder along +z from z0 to z1 around the z axis, capped with concentric rings.
inline TriMesh make_cylinder(double radius, double z0, double z1, double max_edge,
                             std::string name = {}) {
  if (!(radius > 0.0) || !(z1 > z0)) throw InvalidArgument("make_cylinder: bad dimensions");
  const int seg = detail::segments_for(2.0 * std::numbers::pi * radius, max_edge, 8);
  const int axial = detail::segments_for(z1 - z0, max_edge);
  const int rings = detail::segments_for(radius, max_edge);
  detail::MeshBuilder mb;
  auto ring_point = [&](double r, int k, double z) {
    const double a = 2.0 * std::numbers::pi * (static_cast<double>(k % seg) / seg);
    return Vec3{r * std::cos(a), r * std::sin(a), z};
  };
  // Side wall.
  for (int i = 0; i < axial; ++i) {
    const double za = detail::lerp(z0, z1, i, axial);
    const double zb = detail::lerp(z0, z1, i + 1, axial);
    for (int k = 0; k < seg; ++k) {
      const auto a = mb.vertex(ring_point(radius, k, za));
      const auto b = mb.vertex(ring_point(radius, k + 1, za));
      const auto c = mb.vertex(ring_point(radius, k + 1, zb));
      const auto d = mb.vertex(ring_point(radius, k, zb));
      mb.quad(a, b, c, d);
    }
  }
  // Caps: ring r index 0 is the center point.
  for (int side = 0; side < 2; ++side) {
    const double z = side ? z1 : z0;
    const auto center = mb.vertex({0.0, 0.0, z});
    for (int r = 1; r <= rings; ++r) {
      const double ro = detail::lerp(0.0, radius, r, rings);
      const double ri = detail::lerp(0.0, radius, r - 1, rings);
      for (int k = 0; k < seg; ++k) {
        const auto o0 = mb.vertex(ring_point(ro, k, z));
        const auto o1 = mb.vertex(ring_point(ro, k + 1, z));
        if (r == 1) {
          side ? mb.triangle(center, o0, o1) : mb.triangle(center, o1, o0);
        } else {
          const auto i0 = mb.vertex(ring_point(ri, k, z));
          const auto i1 = mb.vertex(ring_point(ri, k + 1, z));
          side ? mb.quad(i0, o0, o1, i1) : mb.quad(i0, i1, o1, o0);
        }
      }
    }
  }
  return std::move(mb).build(std::move(name));
}

/// Ellipsoid centered at the origin with the given semi-axes (UV tessellation with poles).
inline TriMesh make_ellipsoid(const Vec3& semi_axes, double max_edge, std::string name = {}) {
  if (!(semi_axes.x > 0.0 && semi_axes.y > 0.0 && semi_axes.z > 0.0))
    throw InvalidArgument("make_ellipsoid: semi-axes must be positive");
  const double r = std::max({semi_axes.x, semi_axes.y, semi_axes.z});
  const int seg = detail::segments_for(2.0 * std::numbers::pi * r, max_edge, 8);
  const int stacks = detail::segments_for(std::numbers::pi * r, max_edge, 4);
  detail::MeshBuilder mb;
  auto point = [&](int i, int k) {
    if (i == 0) return Vec3{0.0, 0.0, -semi_axes.z};
    if (i == stacks) return Vec3{0.0, 0.0, semi_axes.z};
    const double phi = std::numbers::pi * (static_cast<double>(i) / stacks) - std::numbers::pi / 2;
    const double th = 2.0 * std::numbers::pi * (static_cast<double>(k % seg) / seg);
    return Vec3{semi_axes.x * std::cos(phi) * std::cos(th), semi_axes.y * std::cos(phi) * std::sin(th),
                semi_axes.z * std::sin(phi)};
  };
  for (int i = 0; i < stacks; ++i)
    for (int k = 0; k < seg; ++k) {
      const auto a = mb.vertex(point(i, k));
      const auto b = mb.vertex(point(i, k + 1));
      const auto c = mb.vertex(point(i + 1, k + 1));
      const auto d = mb.vertex(point(i + 1, k));
      if (i == 0) {
        mb.triangle(a, c, d);
      } else if (i == stacks - 1) {
        mb.triangle(a, b, c);
      } else {
        mb.quad(a, b, c, d);
      }
    }
  return std::move(mb).build(std::move(name));
}

}  // namespace ebrt::geom
