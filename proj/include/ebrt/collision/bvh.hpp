#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "ebrt/core/error.hpp"
#include "ebrt/geometry/tri_mesh.hpp"

namespace ebrt::collision {

using geom::Aabb;
using geom::TriMesh;
using geom::Vec3;

/// Binary AABB tree over a mesh's triangles, in the mesh's local frame.
///
/// Built top-down by splitting at the centroid median along the longest axis of the centroid
/// bounds. Leaves hold at most kLeafSize triangles. The tree only stores triangle indices, so
/// queries take the mesh alongside it.
class Bvh {
 public:
  static constexpr std::uint32_t kLeafSize = 4;

  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: offset into order(); inner: left child
    std::uint32_t count = 0;  // leaf: triangle count; inner: 0
    std::uint32_t right = 0;  // inner: right child
    bool is_leaf() const { return count > 0; }
  };

  Bvh() = default;

  explicit Bvh(const TriMesh& mesh) {
    if (mesh.empty()) throw InvalidArgument("build_bvh: empty mesh");
    const auto n = mesh.triangle_count();
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0u);
    boxes_.resize(n);
    centroids_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto t = mesh.triangle(i);
      boxes_[i] = Aabb::of(t);
      centroids_[i] = (t[0] + t[1] + t[2]) / 3.0;
    }
    nodes_.reserve(2 * (n / kLeafSize + 1));
    build(0, static_cast<std::uint32_t>(n), 1);
    boxes_.clear();
    boxes_.shrink_to_fit();
    centroids_.clear();
    centroids_.shrink_to_fit();
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& root() const { return nodes_.front(); }
  /// Triangle indices in leaf order.
  const std::vector<std::uint32_t>& order() const { return order_; }
  std::size_t depth() const { return depth_; }
  std::size_t triangle_count() const { return order_.size(); }

 private:
  std::uint32_t build(std::uint32_t begin, std::uint32_t end, std::size_t level) {
    depth_ = std::max(depth_, level);
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Aabb box;
    Aabb centroid_box;
    for (auto i = begin; i < end; ++i) {
      box.extend(boxes_[order_[i]]);
      centroid_box.extend(centroids_[order_[i]]);
    }
    nodes_[index].box = box;
    if (end - begin <= kLeafSize) {
      nodes_[index].first = begin;
      nodes_[index].count = end - begin;
      return index;
    }
    const int axis = centroid_box.longest_axis();
    const auto mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double ca = centroids_[a][axis];
                       const double cb = centroids_[b][axis];
                       return ca != cb ? ca < cb : a < b;
                     });
    const auto left = build(begin, mid, level + 1);
    const auto right = build(mid, end, level + 1);
    nodes_[index].first = left;
    nodes_[index].right = right;
    return index;
  }

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
  std::vector<Aabb> boxes_;
  std::vector<Vec3> centroids_;
  std::size_t depth_ = 0;
};

inline Bvh build_bvh(const TriMesh& m) { return Bvh(m); }

}  // namespace ebrt::collision
