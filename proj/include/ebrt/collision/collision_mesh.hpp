#pragma once

#include <array>
#include <memory>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>

#include "ebrt/collision/bvh.hpp"
#include "ebrt/geometry/transform.hpp"
#include "ebrt/geometry/tri_mesh.hpp"

namespace ebrt::collision {

using geom::Mat3;
using geom::Obb;
using geom::Transform;

namespace detail {

inline Obb box_along(const TriMesh& m, const Mat3& axes) {
  Aabb local;
  for (const auto& v : m.vertices()) local.extend(axes.transposed() * v);
  const Vec3 c = local.center();
  Vec3 h = local.half_extents();
  // Keep a flat mesh's box a proper solid.
  for (int k = 0; k < 3; ++k) h[k] = std::max(h[k], 1e-6);
  return {axes * c, h, axes};
}

}  // namespace detail

/// Tight oriented box of a mesh in its own frame: the smaller of the frame-aligned box and the
/// box along the principal axes of the vertex cloud.
inline Obb fit_obb(const TriMesh& m) {
  if (m.empty()) throw InvalidArgument("fit_obb: empty mesh");
  const Obb aligned = detail::box_along(m, Mat3::identity());

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& v : m.vertices()) mean += Eigen::Vector3d(v.x, v.y, v.z);
  mean /= static_cast<double>(m.vertex_count());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& v : m.vertices()) {
    const Eigen::Vector3d d = Eigen::Vector3d(v.x, v.y, v.z) - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  if (solver.info() != Eigen::Success) return aligned;
  Eigen::Matrix3d ev = solver.eigenvectors();
  if (ev.determinant() < 0.0) ev.col(2) = -ev.col(2);
  Mat3 axes;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) axes(r, c) = ev(r, c);
  const Obb principal = detail::box_along(m, axes);
  // Ties go to the frame-aligned box.
  return principal.volume() < aligned.volume() * (1.0 - 1e-9) ? principal : aligned;
}

/// A mesh prepared for collision queries: immutable, shared between scenes and threads.
class CollisionMesh {
 public:
  explicit CollisionMesh(TriMesh mesh)
      : mesh_(std::move(mesh)), bvh_(mesh_), obb_(fit_obb(mesh_)) {}

  const TriMesh& mesh() const { return mesh_; }
  const Bvh& bvh() const { return bvh_; }
  /// Bounding parallelepiped in the mesh frame.
  const Obb& obb() const { return obb_; }
  const std::string& name() const { return mesh_.name(); }

 private:
  TriMesh mesh_;
  Bvh bvh_;
  Obb obb_;
};

using CollisionMeshPtr = std::shared_ptr<const CollisionMesh>;

inline CollisionMeshPtr make_collision_mesh(TriMesh m) {
  return std::make_shared<const CollisionMesh>(std::move(m));
}

enum class ComponentRole {
  Gantry,
  Collimator,
  CouchTop,
  CouchBase,
  CouchAttachment,
  CollimatorAttachment,
  Patient,
  Other,
};

/// A mesh placed in the world frame.
struct PlacedComponent {
  std::string id;
  Transform world;
  CollisionMeshPtr shape;
  ComponentRole role = ComponentRole::Other;
  bool collidable = true;
};

}  // namespace ebrt::collision
