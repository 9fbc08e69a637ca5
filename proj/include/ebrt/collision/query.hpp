#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>

#include "ebrt/collision/bvh.hpp"
#include "ebrt/geometry/transform.hpp"
#include "ebrt/geometry/triangle.hpp"

// Mesh-pair proximity queries. Both meshes are given in their local frames; `b_to_a` maps the
// second mesh into the first one's frame and every result is expressed in that frame.

namespace ebrt::collision {

using geom::Transform;
using geom::TriDistance;
using geom::Triangle;

namespace detail {

class PairQuery {
 public:
  PairQuery(const TriMesh& a, const Bvh& ba, const TriMesh& b, const Bvh& bb, const Transform& b_to_a)
      : a_(a),
        ba_(ba),
        b_(b),
        bb_(bb),
        rel_(b_to_a),
        inv_(invert(b_to_a)),
        abs_rot_(b_to_a.rotation().cwise_abs()),
        abs_rot_inv_(inv_.rotation().cwise_abs()) {}

  TriDistance closest() {
    best_ = {};
    stop_below_ = geom::kContactTolerance;
    const Aabb root_b = box_in_a(bb_.root().box);
    distance_rec(0, 0, root_b, lower_bound(ba_.root().box, bb_.root().box, root_b));
    return best_;
  }

  bool intersects() {
    hit_ = false;
    overlap_rec(0, 0, box_in_a(bb_.root().box));
    return hit_;
  }

  // All-pairs reference path (no tree pruning) producing the same result fields.
  TriDistance closest_brute_force() {
    TriDistance best;
    for (std::size_t j = 0; j < b_.triangle_count(); ++j) {
      const Triangle tb = tri_b(static_cast<std::uint32_t>(j));
      for (std::size_t i = 0; i < a_.triangle_count(); ++i) {
        const auto d = geom::detail::tri_tri_closest(a_.triangle(i), tb);
        if (d.distance < best.distance) best = d;
        if (best.distance < geom::kContactTolerance) return best;
      }
    }
    return best;
  }

 private:
  // Conservative enclosing box of a box after a rigid map.
  static Aabb mapped_box(const Aabb& box, const Transform& t, const geom::Mat3& abs_rot) {
    const Vec3 c = t.apply(box.center());
    const Vec3 h = abs_rot * box.half_extents();
    const double pad = 1e-9 * (1.0 + std::max({std::abs(c.x), std::abs(c.y), std::abs(c.z), h.x, h.y, h.z}));
    const Vec3 e = h + Vec3{pad, pad, pad};
    return {c - e, c + e};
  }

  Aabb box_in_a(const Aabb& box) const { return mapped_box(box, rel_, abs_rot_); }

  // Box-pair distance bound, taken in both frames: re-boxing after a rotation loosens the
  // mapped box, and the two frames loosen different sides.
  double lower_bound(const Aabb& a_box, const Aabb& b_local, const Aabb& b_in_a) const {
    const double in_a = geom::aabb_distance(a_box, b_in_a);
    const double in_b = geom::aabb_distance(mapped_box(a_box, inv_, abs_rot_inv_), b_local);
    return std::max(in_a, in_b);
  }

  Triangle tri_b(std::uint32_t i) const {
    const auto t = b_.triangle(i);
    return {rel_.apply(t[0]), rel_.apply(t[1]), rel_.apply(t[2])};
  }

  static double size(const Aabb& b) { return geom::norm2(b.extents()); }

  void leaf_pair(const Bvh::Node& na, const Bvh::Node& nb) {
    std::array<Triangle, Bvh::kLeafSize> tb;
    std::array<Aabb, Bvh::kLeafSize> boxb;
    for (std::uint32_t j = 0; j < nb.count; ++j) {
      tb[j] = tri_b(bb_.order()[nb.first + j]);
      boxb[j] = Aabb::of(tb[j]);
    }
    for (std::uint32_t i = 0; i < na.count; ++i) {
      const Triangle ta = a_.triangle(ba_.order()[na.first + i]);
      const Aabb boxa = Aabb::of(ta);
      for (std::uint32_t j = 0; j < nb.count; ++j) {
        if (geom::aabb_distance(boxa, boxb[j]) >= best_.distance) continue;
        const auto d = geom::detail::tri_tri_closest(ta, tb[j]);
        if (d.distance < best_.distance) {
          best_ = d;
          if (best_.distance < stop_below_) return;
        }
      }
    }
  }

  void distance_rec(std::uint32_t ia, std::uint32_t ib, const Aabb& box_b, double bound) {
    const auto& na = ba_.nodes()[ia];
    const auto& nb = bb_.nodes()[ib];
    if (bound >= best_.distance) return;
    if (na.is_leaf() && nb.is_leaf()) {
      leaf_pair(na, nb);
      return;
    }
    const bool split_a = nb.is_leaf() || (!na.is_leaf() && size(na.box) >= size(box_b));
    if (split_a) {
      const std::uint32_t c[2] = {na.first, na.right};
      double lb[2];
      for (int k = 0; k < 2; ++k) lb[k] = lower_bound(ba_.nodes()[c[k]].box, nb.box, box_b);
      const int first = lb[1] < lb[0] ? 1 : 0;
      for (int k : {first, 1 - first}) {
        if (lb[k] >= best_.distance || best_.distance < stop_below_) continue;
        distance_rec(c[k], ib, box_b, lb[k]);
      }
    } else {
      const std::uint32_t c[2] = {nb.first, nb.right};
      Aabb boxes[2];
      double lb[2];
      for (int k = 0; k < 2; ++k) {
        boxes[k] = box_in_a(bb_.nodes()[c[k]].box);
        lb[k] = lower_bound(na.box, bb_.nodes()[c[k]].box, boxes[k]);
      }
      const int first = lb[1] < lb[0] ? 1 : 0;
      for (int k : {first, 1 - first}) {
        if (lb[k] >= best_.distance || best_.distance < stop_below_) continue;
        distance_rec(ia, c[k], boxes[k], lb[k]);
      }
    }
  }

  void overlap_rec(std::uint32_t ia, std::uint32_t ib, const Aabb& box_b) {
    if (hit_) return;
    const auto& na = ba_.nodes()[ia];
    const auto& nb = bb_.nodes()[ib];
    if (geom::aabb_distance(na.box, box_b) >= geom::kContactTolerance) return;
    if (na.is_leaf() && nb.is_leaf()) {
      for (std::uint32_t j = 0; j < nb.count && !hit_; ++j) {
        const Triangle tb = tri_b(bb_.order()[nb.first + j]);
        for (std::uint32_t i = 0; i < na.count && !hit_; ++i) {
          const Triangle ta = a_.triangle(ba_.order()[na.first + i]);
          if (geom::detail::separated_by_plane(ta, tb, geom::kContactTolerance) ||
              geom::detail::separated_by_plane(tb, ta, geom::kContactTolerance))
            continue;
          hit_ = geom::detail::tri_tri_closest(ta, tb).distance < geom::kContactTolerance;
        }
      }
      return;
    }
    const bool split_a = nb.is_leaf() || (!na.is_leaf() && size(na.box) >= size(box_b));
    if (split_a) {
      overlap_rec(na.first, ib, box_b);
      overlap_rec(na.right, ib, box_b);
    } else {
      overlap_rec(ia, nb.first, box_in_a(bb_.nodes()[nb.first].box));
      overlap_rec(ia, nb.right, box_in_a(bb_.nodes()[nb.right].box));
    }
  }

  const TriMesh& a_;
  const Bvh& ba_;
  const TriMesh& b_;
  const Bvh& bb_;
  Transform rel_;
  Transform inv_;
  geom::Mat3 abs_rot_;
  geom::Mat3 abs_rot_inv_;
  TriDistance best_;
  double stop_below_ = 0.0;
  bool hit_ = false;
};

}  // namespace detail

/// Minimum distance and witness points between two meshes, in A's frame. Stops at the first
/// contact (distance below the contact tolerance).
inline TriDistance mesh_distance(const TriMesh& a, const Bvh& ba, const TriMesh& b, const Bvh& bb,
                                 const Transform& b_to_a) {
  return detail::PairQuery(a, ba, b, bb, b_to_a).closest();
}

inline TriDistance mesh_distance_brute_force(const TriMesh& a, const Bvh& ba, const TriMesh& b,
                                             const Bvh& bb, const Transform& b_to_a) {
  return detail::PairQuery(a, ba, b, bb, b_to_a).closest_brute_force();
}

/// Boolean contact test with early exit.
inline bool mesh_intersect(const TriMesh& a, const Bvh& ba, const TriMesh& b, const Bvh& bb,
                           const Transform& b_to_a) {
  return detail::PairQuery(a, ba, b, bb, b_to_a).intersects();
}

struct PointDistance {
  double distance = std::numeric_limits<double>::infinity();
  Vec3 closest;
};

/// Nearest point on the mesh surface to `p` (mesh frame).
inline PointDistance point_mesh_distance(const TriMesh& m, const Bvh& bvh, const Vec3& p) {
  PointDistance best;
  double best2 = std::numeric_limits<double>::infinity();
  auto box_dist2 = [&](const Aabb& b) {
    const Vec3 d = geom::cwise_max(geom::cwise_max(b.min - p, p - b.max), Vec3{});
    return geom::norm2(d);
  };
  auto rec = [&](auto&& self, std::uint32_t i) -> void {
    const auto& n = bvh.nodes()[i];
    if (box_dist2(n.box) >= best2) return;
    if (n.is_leaf()) {
      for (std::uint32_t k = 0; k < n.count; ++k) {
        const Vec3 c = geom::closest_point_on_triangle(p, m.triangle(bvh.order()[n.first + k]));
        const double d2 = geom::norm2(c - p);
        if (d2 < best2) {
          best2 = d2;
          best.closest = c;
        }
      }
      return;
    }
    const double dl = box_dist2(bvh.nodes()[n.first].box);
    const double dr = box_dist2(bvh.nodes()[n.right].box);
    if (dl <= dr) {
      self(self, n.first);
      self(self, n.right);
    } else {
      self(self, n.right);
      self(self, n.first);
    }
  };
  rec(rec, 0);
  best.distance = std::sqrt(best2);
  return best;
}

/// Fit quality of a bounding box: the largest distance from a sample of the box surface
/// (an n x n grid per face) to the mesh surface, both in the mesh frame.
inline double obb_fit_deviation(const TriMesh& m, const Bvh& bvh, const geom::Obb& box, int n = 8) {
  double worst = 0.0;
  for (int axis = 0; axis < 3; ++axis)
    for (int side = -1; side <= 1; side += 2)
      for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
          Vec3 local;
          local[axis] = side * box.half_extents[axis];
          local[(axis + 1) % 3] = box.half_extents[(axis + 1) % 3] * (2.0 * i / n - 1.0);
          local[(axis + 2) % 3] = box.half_extents[(axis + 2) % 3] * (2.0 * j / n - 1.0);
          const Vec3 p = box.center + box.axes * local;
          worst = std::max(worst, point_mesh_distance(m, bvh, p).distance);
        }
  return worst;
}

}  // namespace ebrt::collision
