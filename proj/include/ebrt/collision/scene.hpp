#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ebrt/collision/collision_mesh.hpp"
#include "ebrt/collision/query.hpp"
#include "ebrt/core/error.hpp"

namespace ebrt::collision {

enum class PairMode { MeshMesh, ObbMesh };

inline const char* to_string(PairMode m) { return m == PairMode::MeshMesh ? "mesh-mesh" : "obb-mesh"; }

/// A registered pair of potential colliders. In ObbMesh mode the source is replaced by its
/// bounding parallelepiped.
struct ColliderPair {
  std::string source;
  std::string target;
  PairMode mode = PairMode::MeshMesh;
};

struct QueryOptions {
  bool use_bvh = true;
  /// Only the colliding flag is needed: early exit, distance is not computed.
  bool boolean_only = false;
};

/// Outcome for one source/target pair. Witness points are world-frame: the contact point when
/// colliding, otherwise the closest pair. distance_mm is 0 when colliding and +inf when the
/// query was boolean-only and found no contact.
struct CollisionReport {
  std::string source;
  std::string target;
  PairMode mode = PairMode::MeshMesh;
  bool colliding = false;
  double distance_mm = std::numeric_limits<double>::infinity();
  Vec3 witness_source;
  Vec3 witness_target;
  std::vector<std::string> highlighted;
};

namespace detail {

inline CollisionReport make_report(std::string source, std::string target, PairMode mode) {
  CollisionReport r;
  r.source = std::move(source);
  r.target = std::move(target);
  r.mode = mode;
  return r;
}

// Canonical operand order so swapping source and target repeats the exact same arithmetic:
// larger mesh first, then by placement, then by geometry.
inline bool goes_first(const CollisionMesh& a, const Transform& ta, const CollisionMesh& b,
                       const Transform& tb) {
  const auto& ma = a.mesh();
  const auto& mb = b.mesh();
  if (ma.triangle_count() != mb.triangle_count()) return ma.triangle_count() > mb.triangle_count();
  if (ma.vertex_count() != mb.vertex_count()) return ma.vertex_count() > mb.vertex_count();
  if (ta != tb) return geom::lexicographic_less(ta, tb);
  const auto& va = ma.vertices();
  const auto& vb = mb.vertices();
  const auto diff = std::mismatch(va.begin(), va.end(), vb.begin());
  if (diff.first == va.end()) return true;
  return geom::lexicographic_less(*diff.first, *diff.second);
}

inline void finish(CollisionReport& r, const TriDistance& d, const Transform& frame, bool source_is_a) {
  const Vec3 wa = frame.apply(d.on_first);
  const Vec3 wb = frame.apply(d.on_second);
  r.witness_source = source_is_a ? wa : wb;
  r.witness_target = source_is_a ? wb : wa;
  r.colliding = d.distance < geom::kContactTolerance;
  r.distance_mm = r.colliding ? 0.0 : d.distance;
  if (r.colliding) r.highlighted = {r.source, r.target};
}

inline CollisionReport collide_meshes(const std::string& source_id, const CollisionMesh& s,
                                      const Transform& ts, const std::string& target_id,
                                      const CollisionMesh& t, const Transform& tt, PairMode mode,
                                      const QueryOptions& opt) {
  CollisionReport r = make_report(source_id, target_id, mode);
  const bool source_first = goes_first(s, ts, t, tt);
  const CollisionMesh& a = source_first ? s : t;
  const CollisionMesh& b = source_first ? t : s;
  const Transform& frame = source_first ? ts : tt;
  const Transform rel = invert(frame) * (source_first ? tt : ts);
  if (opt.boolean_only) {
    const bool hit = opt.use_bvh ? mesh_intersect(a.mesh(), a.bvh(), b.mesh(), b.bvh(), rel)
                                 : mesh_distance_brute_force(a.mesh(), a.bvh(), b.mesh(), b.bvh(), rel)
                                           .distance < geom::kContactTolerance;
    r.colliding = hit;
    r.distance_mm = hit ? 0.0 : std::numeric_limits<double>::infinity();
    if (hit) r.highlighted = {source_id, target_id};
    return r;
  }
  const TriDistance d = opt.use_bvh ? mesh_distance(a.mesh(), a.bvh(), b.mesh(), b.bvh(), rel)
                                    : mesh_distance_brute_force(a.mesh(), a.bvh(), b.mesh(), b.bvh(), rel);
  finish(r, d, frame, source_first);
  return r;
}

}  // namespace detail

/// Polygon-level test of one placed mesh against one other.
inline CollisionReport collide(const PlacedComponent& source, const PlacedComponent& target,
                               const QueryOptions& opt = {}) {
  if (!source.shape || !target.shape) throw InvalidArgument("collide: component without geometry");
  if (source.id == target.id && !source.id.empty())
    throw InvalidArgument("collide: source and target are the same component '" + source.id + "'");
  return detail::collide_meshes(source.id, *source.shape, source.world, target.id, *target.shape,
                                target.world, PairMode::MeshMesh, opt);
}

/// One source geometry against a composite target group: one report per target.
inline std::vector<CollisionReport> compute_collision(const PlacedComponent& source,
                                                      std::span<const PlacedComponent> targets,
                                                      const QueryOptions& opt = {}) {
  if (!source.shape || source.shape->mesh().empty())
    throw InvalidArgument("compute_collision: empty source");
  if (targets.empty()) throw InvalidArgument("compute_collision: empty target set");
  std::vector<CollisionReport> out;
  out.reserve(targets.size());
  for (const auto& t : targets) out.push_back(collide(source, t, opt));
  return out;
}

/// Couch-versus-gantry check with the couch approximated by a parallelepiped. The box is
/// carried into the gantry's frame by inverse(gantry) * couch, so the gantry mesh and its tree
/// are used untransformed. The box mesh itself stays axis-aligned in its own frame, which keeps
/// the tree bounds tight. Witness points are returned in world frame.
inline CollisionReport couch_gantry_fast_check(const Obb& couch_obb, const Transform& couch_world,
                                               const CollisionMesh& gantry,
                                               const Transform& gantry_world,
                                               const QueryOptions& opt = {},
                                               std::string couch_id = "couch",
                                               std::string gantry_id = "gantry") {
  const Transform couch_in_gantry = compose(invert(gantry_world), couch_world);
  const Transform box_frame(couch_obb.axes, couch_obb.center);
  const TriMesh box = Obb{{}, couch_obb.half_extents, geom::Mat3::identity()}.to_mesh("couch-obb");
  const Bvh box_bvh(box);
  auto r = detail::make_report(std::move(couch_id), std::move(gantry_id), PairMode::ObbMesh);
  const Transform box_to_gantry = compose(couch_in_gantry, box_frame);
  const auto& g = gantry.mesh();
  if (opt.boolean_only) {
    const bool hit = opt.use_bvh ? mesh_intersect(g, gantry.bvh(), box, box_bvh, box_to_gantry)
                                 : mesh_distance_brute_force(g, gantry.bvh(), box, box_bvh, box_to_gantry)
                                           .distance < geom::kContactTolerance;
    r.colliding = hit;
    r.distance_mm = hit ? 0.0 : std::numeric_limits<double>::infinity();
    if (hit) r.highlighted = {r.source, r.target};
    return r;
  }
  const TriDistance d = opt.use_bvh ? mesh_distance(g, gantry.bvh(), box, box_bvh, box_to_gantry)
                                    : mesh_distance_brute_force(g, gantry.bvh(), box, box_bvh, box_to_gantry);
  detail::finish(r, d, gantry_world, /*source_is_a=*/false);
  return r;
}

inline const PlacedComponent& find_component(std::span<const PlacedComponent> placed,
                                             const std::string& id) {
  for (const auto& p : placed)
    if (p.id == id) return p;
  throw NotFound("no placed component '" + id + "'");
}

/// Default collider set: gantry x couch (couch as parallelepiped), collimator x couch,
/// collimator x each couch attachment, gantry x patient, collimator x patient. Collimator
/// attachments hang off the collimator and are checked against the same targets.
inline std::vector<ColliderPair> default_pairs(std::span<const PlacedComponent> placed) {
  std::vector<const PlacedComponent*> gantry, collimator_side, couch, couch_attachments, patient;
  for (const auto& p : placed) {
    if (!p.collidable) continue;
    switch (p.role) {
      case ComponentRole::Gantry: gantry.push_back(&p); break;
      case ComponentRole::Collimator:
      case ComponentRole::CollimatorAttachment: collimator_side.push_back(&p); break;
      case ComponentRole::CouchTop: couch.push_back(&p); break;
      case ComponentRole::CouchAttachment: couch_attachments.push_back(&p); break;
      case ComponentRole::Patient: patient.push_back(&p); break;
      default: break;
    }
  }
  std::vector<ColliderPair> pairs;
  for (auto* g : gantry)
    for (auto* c : couch) pairs.push_back({c->id, g->id, PairMode::ObbMesh});
  for (auto* s : collimator_side) {
    for (auto* c : couch) pairs.push_back({s->id, c->id});
    for (auto* a : couch_attachments) pairs.push_back({s->id, a->id});
  }
  for (auto* g : gantry)
    for (auto* p : patient) pairs.push_back({g->id, p->id});
  for (auto* s : collimator_side)
    for (auto* p : patient) pairs.push_back({s->id, p->id});
  return pairs;
}

/// Evaluates every registered pair; reports come back in pair order.
inline std::vector<CollisionReport> scene_collision(std::span<const PlacedComponent> placed,
                                                    std::span<const ColliderPair> pairs,
                                                    const QueryOptions& opt = {}) {
  std::vector<CollisionReport> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) {
    if (pair.source == pair.target)
      throw InvalidArgument("collider pair references '" + pair.source + "' twice");
    const auto& s = find_component(placed, pair.source);
    const auto& t = find_component(placed, pair.target);
    if (pair.mode == PairMode::ObbMesh) {
      out.push_back(couch_gantry_fast_check(s.shape->obb(), s.world, *t.shape, t.world, opt, s.id, t.id));
    } else {
      out.push_back(detail::collide_meshes(s.id, *s.shape, s.world, t.id, *t.shape, t.world,
                                           PairMode::MeshMesh, opt));
    }
  }
  return out;
}

inline std::vector<CollisionReport> scene_collision(std::span<const PlacedComponent> placed,
                                                    const QueryOptions& opt = {}) {
  const auto pairs = default_pairs(placed);
  return scene_collision(placed, pairs, opt);
}

inline bool any_colliding(std::span<const CollisionReport> reports) {
  return std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.colliding; });
}

/// Collider ids to highlight, deduplicated, in first-seen order.
inline std::vector<std::string> highlighted_ids(std::span<const CollisionReport> reports) {
  std::vector<std::string> ids;
  for (const auto& r : reports)
    for (const auto& id : r.highlighted)
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  return ids;
}

/// True if `p` lies inside the closed convex outward-wound mesh.
inline bool inside_convex(const TriMesh& convex, const Vec3& p) {
  for (std::size_t i = 0; i < convex.triangle_count(); ++i) {
    const auto t = convex.triangle(i);
    if (dot(geom::triangle_normal(t), p - t[0]) > 0.0) return false;
  }
  return true;
}

/// Beam frustum (world frame) against the couch top and couch attachments. A target also counts
/// as intersecting when it lies wholly inside the frustum. Reported apart from mechanical
/// collisions: this is a treatment-quality warning.
inline std::vector<CollisionReport> beam_couch_intersection(const TriMesh& beam_world,
                                                            std::span<const PlacedComponent> placed,
                                                            const QueryOptions& opt = {}) {
  const PlacedComponent beam{"beam", Transform::identity(), make_collision_mesh(beam_world)};
  std::vector<CollisionReport> out;
  for (const auto& p : placed) {
    if (p.role != ComponentRole::CouchTop && p.role != ComponentRole::CouchAttachment) continue;
    auto r = collide(beam, p, opt);
    if (!r.colliding) {
      // No surface contact: each disjoint part is wholly inside or wholly outside.
      for (const auto& v : p.shape->mesh().vertices()) {
        const Vec3 probe = p.world.apply(v);
        if (!inside_convex(beam_world, probe)) continue;
        r.colliding = true;
        r.distance_mm = 0.0;
        r.witness_source = r.witness_target = probe;
        r.highlighted = {r.source, r.target};
        break;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace ebrt::collision
