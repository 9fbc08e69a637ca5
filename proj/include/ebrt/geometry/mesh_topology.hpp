#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "ebrt/geometry/tri_mesh.hpp"

namespace ebrt::geom {

struct EdgeStats {
  std::size_t edges = 0;
  std::size_t boundary_edges = 0;     // one incident triangle
  std::size_t nonmanifold_edges = 0;  // three or more
  std::size_t inconsistent_edges = 0; // two triangles traversing the edge the same way
};

inline EdgeStats edge_stats(const TriMesh& m) {
  // value: (incidence count, signed traversal sum)
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<int, int>> edges;
  for (const auto& t : m.triangles())
    for (int k = 0; k < 3; ++k) {
      const auto a = t[k];
      const auto b = t[(k + 1) % 3];
      auto& e = edges[{std::min(a, b), std::max(a, b)}];
      ++e.first;
      e.second += a < b ? 1 : -1;
    }
  EdgeStats s;
  s.edges = edges.size();
  for (const auto& [key, e] : edges) {
    if (e.first == 1) ++s.boundary_edges;
    if (e.first > 2) ++s.nonmanifold_edges;
    if (e.first == 2 && e.second != 0) ++s.inconsistent_edges;
  }
  return s;
}

/// Every edge shared by exactly two triangles.
inline bool is_watertight(const TriMesh& m) {
  if (m.empty()) return false;
  const auto s = edge_stats(m);
  return s.boundary_edges == 0 && s.nonmanifold_edges == 0;
}

/// V - E + F over referenced vertices.
inline long long euler_characteristic(const TriMesh& m) {
  std::vector<char> used(m.vertex_count(), 0);
  for (const auto& t : m.triangles())
    for (auto i : t) used[i] = 1;
  const auto v = std::count(used.begin(), used.end(), 1);
  return static_cast<long long>(v) - static_cast<long long>(edge_stats(m).edges) +
         static_cast<long long>(m.triangle_count());
}

/// Splits into vertex-connected components, largest (by triangle count) first; ties keep
/// first-appearance order.
inline std::vector<TriMesh> connected_components(const TriMesh& m) {
  std::vector<std::uint32_t> parent(m.vertex_count());
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& t : m.triangles()) {
    const auto r0 = find(t[0]);
    parent[find(t[1])] = r0;
    parent[find(t[2])] = r0;
  }
  std::map<std::uint32_t, std::size_t> slot;
  std::vector<std::vector<TriIndex>> groups;
  for (const auto& t : m.triangles()) {
    auto [it, inserted] = slot.try_emplace(find(t[0]), groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(t);
  }
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  std::vector<TriMesh> out;
  for (auto& g : groups) out.push_back(TriMesh::compacted(m.vertices(), std::move(g), m.name()));
  return out;
}

inline TriMesh largest_component(const TriMesh& m) {
  if (m.empty()) return m;
  return connected_components(m).front();
}

}  // namespace ebrt::geom
