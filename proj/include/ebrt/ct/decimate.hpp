#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include <Eigen/Dense>

#include "ebrt/core/error.hpp"
#include "ebrt/ct/marching_cubes.hpp"
#include "ebrt/geometry/tri_mesh.hpp"

namespace ebrt::ct {

namespace detail {

using Quadric = Eigen::Matrix4d;

inline Eigen::Vector4d homogeneous(const Vec3& p) { return {p.x, p.y, p.z, 1.0}; }

inline Quadric plane_quadric(const Vec3& n, const Vec3& p, double weight) {
  const Eigen::Vector4d q{n.x, n.y, n.z, -geom::dot(n, p)};
  return weight * (q * q.transpose());
}

inline double quadric_cost(const Quadric& q, const Vec3& p) {
  const auto h = homogeneous(p);
  return std::max(0.0, h.dot(q * h));
}

struct Candidate {
  double cost;
  std::uint32_t u, v;
  std::uint32_t stamp_u, stamp_v;
  Vec3 position;
};

/// Min-heap order with index tie-breaks, so equal costs resolve the same way on every run.
struct CandidateAfter {
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.cost != b.cost) return a.cost > b.cost;
    if (a.u != b.u) return a.u > b.u;
    return a.v > b.v;
  }
};

/// Quadric error metric edge collapse on an indexed triangle mesh.
class Decimator {
 public:
  explicit Decimator(const TriMesh& m)
      : pos_(m.vertices()), faces_(m.triangles()), alive_face_(faces_.size(), 1), alive_vertex_(pos_.size(), 1),
        stamp_(pos_.size(), 0), q_(pos_.size(), Quadric::Zero()), vertex_faces_(pos_.size()),
        bounds_(geom::mesh_aabb(m)), alive_faces_(faces_.size()) {
    for (std::uint32_t f = 0; f < faces_.size(); ++f)
      for (auto v : faces_[f]) vertex_faces_[v].push_back(f);
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      const auto& t = faces_[f];
      const Vec3 c = geom::cross(pos_[t[1]] - pos_[t[0]], pos_[t[2]] - pos_[t[0]]);
      const double len = geom::norm(c);
      const Quadric k = plane_quadric(c / len, pos_[t[0]], len / 2);
      for (auto v : t) q_[v] += k;
    }
    add_boundary_penalties();
  }

  void run(std::size_t target) {
    for (std::uint32_t u = 0; u < pos_.size(); ++u)
      for (auto v : neighbours(u))
        if (u < v) push(u, v);
    while (alive_faces_ > target && !heap_.empty()) {
      const Candidate c = heap_.top();
      heap_.pop();
      if (!alive_vertex_[c.u] || !alive_vertex_[c.v] || stamp_[c.u] != c.stamp_u || stamp_[c.v] != c.stamp_v)
        continue;
      if (!collapse_allowed(c.u, c.v, c.position)) continue;
      collapse(c.u, c.v, c.position);
    }
  }

  TriMesh result(const std::string& name) const {
    std::vector<std::uint32_t> remap(pos_.size(), std::numeric_limits<std::uint32_t>::max());
    std::vector<Vec3> vertices;
    std::vector<geom::TriIndex> triangles;
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      if (!alive_face_[f]) continue;
      geom::TriIndex t{};
      for (int j = 0; j < 3; ++j) {
        auto& r = remap[faces_[f][j]];
        if (r == std::numeric_limits<std::uint32_t>::max()) {
          r = static_cast<std::uint32_t>(vertices.size());
          vertices.push_back(pos_[faces_[f][j]]);
        }
        t[j] = r;
      }
      triangles.push_back(t);
    }
    return TriMesh(std::move(vertices), std::move(triangles), name);
  }

 private:
  std::vector<std::uint32_t> neighbours(std::uint32_t u) const {
    std::vector<std::uint32_t> out;
    for (auto f : vertex_faces_[u])
      for (auto w : faces_[f])
        if (w != u) out.push_back(w);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  void add_boundary_penalties() {
    // An edge used by a single face is a boundary; a steep perpendicular plane keeps it in place.
    std::vector<std::pair<std::array<std::uint32_t, 2>, std::uint32_t>> edges;
    for (std::uint32_t f = 0; f < faces_.size(); ++f)
      for (int j = 0; j < 3; ++j) {
        auto a = faces_[f][j], b = faces_[f][(j + 1) % 3];
        edges.push_back({{std::min(a, b), std::max(a, b)}, f});
      }
    std::sort(edges.begin(), edges.end());
    for (std::size_t i = 0; i < edges.size();) {
      std::size_t j = i;
      while (j < edges.size() && edges[j].first == edges[i].first) ++j;
      if (j - i == 1) {
        const auto [a, b] = edges[i].first;
        const auto& t = faces_[edges[i].second];
        const Vec3 n = geom::normalized(geom::cross(pos_[t[1]] - pos_[t[0]], pos_[t[2]] - pos_[t[0]]));
        const Vec3 e = pos_[b] - pos_[a];
        const Vec3 m = geom::normalized(geom::cross(e, n));
        const Quadric k = plane_quadric(m, pos_[a], 1000.0 * geom::norm2(e));
        q_[a] += k;
        q_[b] += k;
      }
      i = j;
    }
  }

  Vec3 clamp_to_bounds(const Vec3& p) const {
    return {std::clamp(p.x, bounds_.min.x, bounds_.max.x), std::clamp(p.y, bounds_.min.y, bounds_.max.y),
            std::clamp(p.z, bounds_.min.z, bounds_.max.z)};
  }

  void push(std::uint32_t u, std::uint32_t v) {
    const Quadric q = q_[u] + q_[v];
    std::array<Vec3, 4> options{pos_[u], pos_[v], (pos_[u] + pos_[v]) * 0.5, (pos_[u] + pos_[v]) * 0.5};
    std::size_t count = 3;
    const Eigen::Matrix3d a = q.topLeftCorner<3, 3>();
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(a);
    if (lu.rank() == 3) {
      const Eigen::Vector3d x = lu.solve(-q.topRightCorner<3, 1>());
      const Vec3 p{x[0], x[1], x[2]};
      if (geom::is_finite(p)) options[count++] = clamp_to_bounds(p);
    }
    Candidate best{std::numeric_limits<double>::infinity(), u, v, stamp_[u], stamp_[v], {}};
    for (std::size_t i = 0; i < count; ++i) {
      const double cost = quadric_cost(q, options[i]);
      if (cost < best.cost) {
        best.cost = cost;
        best.position = options[i];
      }
    }
    heap_.push(best);
  }

  static bool has_vertex(const geom::TriIndex& t, std::uint32_t v) { return t[0] == v || t[1] == v || t[2] == v; }

  bool collapse_allowed(std::uint32_t u, std::uint32_t v, const Vec3& p) const {
    // Link condition: the shared neighbours are exactly the apexes of the faces on the edge.
    std::size_t shared_faces = 0;
    for (auto f : vertex_faces_[u])
      if (has_vertex(faces_[f], v)) ++shared_faces;
    if (shared_faces == 0) return false;
    const auto nu = neighbours(u);
    const auto nv = neighbours(v);
    std::vector<std::uint32_t> common;
    std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(), std::back_inserter(common));
    if (common.size() != shared_faces) return false;
    // A face of v renamed onto u must not duplicate a face u already has (tetrahedron fold).
    auto sorted = [](geom::TriIndex t) {
      std::sort(t.begin(), t.end());
      return t;
    };
    for (auto fv : vertex_faces_[v]) {
      if (has_vertex(faces_[fv], u)) continue;
      auto renamed = faces_[fv];
      for (auto& w : renamed)
        if (w == v) w = u;
      renamed = sorted(renamed);
      for (auto fu : vertex_faces_[u])
        if (sorted(faces_[fu]) == renamed) return false;
    }

    for (const auto w : {u, v})
      for (auto f : vertex_faces_[w]) {
        const auto& t = faces_[f];
        if (has_vertex(t, u) && has_vertex(t, v)) continue;
        std::array<Vec3, 3> before{pos_[t[0]], pos_[t[1]], pos_[t[2]]};
        std::array<Vec3, 3> after = before;
        for (int j = 0; j < 3; ++j)
          if (t[j] == w) after[j] = p;
        const Vec3 n0 = geom::cross(before[1] - before[0], before[2] - before[0]);
        const Vec3 n1 = geom::cross(after[1] - after[0], after[2] - after[0]);
        if (geom::norm(n1) / 2 < 1e-10) return false;
        // Reject normal rotations of 90 degrees or more.
        if (geom::dot(n0, n1) <= 0.0) return false;
      }
    return true;
  }

  void collapse(std::uint32_t u, std::uint32_t v, const Vec3& p) {
    for (auto f : vertex_faces_[v]) {
      auto& t = faces_[f];
      if (has_vertex(t, u)) {
        alive_face_[f] = 0;
        --alive_faces_;
        continue;
      }
      for (auto& w : t)
        if (w == v) w = u;
      vertex_faces_[u].push_back(f);
    }
    alive_vertex_[v] = 0;
    vertex_faces_[v].clear();
    // Drop dead faces from every affected vertex list.
    auto prune = [&](std::uint32_t w) {
      auto& list = vertex_faces_[w];
      list.erase(std::remove_if(list.begin(), list.end(), [&](auto f) { return !alive_face_[f]; }), list.end());
    };
    prune(u);
    const auto around = neighbours(u);
    for (auto w : around) prune(w);
    q_[u] += q_[v];
    pos_[u] = p;
    ++stamp_[u];
    for (auto w : around) push(std::min(u, w), std::max(u, w));
  }

  std::vector<Vec3> pos_;
  std::vector<geom::TriIndex> faces_;
  std::vector<char> alive_face_;
  std::vector<char> alive_vertex_;
  std::vector<std::uint32_t> stamp_;
  std::vector<Quadric, Eigen::aligned_allocator<Quadric>> q_;
  std::vector<std::vector<std::uint32_t>> vertex_faces_;
  geom::Aabb bounds_;
  std::size_t alive_faces_;
  std::priority_queue<Candidate, std::vector<Candidate>, CandidateAfter> heap_;
};

}  // namespace detail

/// Reduces a manifold mesh to about `target_triangles` by quadric edge collapse. Flat regions
/// go first; collapses that would break the manifold or turn a face normal by 90 degrees or
/// more are skipped, and new vertices stay inside the input's bounding box.
inline TriMesh decimate_mesh(const TriMesh& m, std::size_t target_triangles) {
  if (target_triangles < 4) throw InvalidArgument("decimation target must be at least 4 triangles");
  if (target_triangles > m.triangle_count())
    throw InvalidArgument("decimation target " + std::to_string(target_triangles) + " exceeds the mesh's " +
                          std::to_string(m.triangle_count()) + " triangles");
  if (target_triangles == m.triangle_count()) return m;
  detail::Decimator d(m);
  d.run(target_triangles);
  return d.result(m.name());
}

inline IsoMesh decimate(const IsoMesh& m, std::size_t target_triangles) {
  IsoMesh out = m;
  out.mesh = decimate_mesh(m.mesh, target_triangles);
  if (!m.mesh.empty())
    out.decimation_ratio =
        m.decimation_ratio * static_cast<double>(out.mesh.triangle_count()) / static_cast<double>(m.mesh.triangle_count());
  return out;
}

}  // namespace ebrt::ct
