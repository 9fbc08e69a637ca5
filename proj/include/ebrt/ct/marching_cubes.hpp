#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "ebrt/ct/mc_tables.hpp"
#include "ebrt/ct/slice_stack.hpp"
#include "ebrt/geometry/mesh_topology.hpp"
#include "ebrt/geometry/tri_mesh.hpp"

namespace ebrt::ct {

using geom::TriIndex;
using geom::TriMesh;

inline constexpr double kDefaultSkinIso = -300.0;

enum class IsoStatus {
  Ok,
  /// iso is not strictly inside the value range, so no surface exists.
  OutOfRange,
};

/// Extracted (and possibly decimated) surface with where it came from.
struct IsoMesh {
  TriMesh mesh;
  double iso = 0.0;
  std::string source_id;
  /// Output triangles divided by extracted triangles; 1 before decimation.
  double decimation_ratio = 1.0;
  IsoStatus status = IsoStatus::Ok;
  std::string warning;
};

struct MarchingCubesOptions {
  /// Keep only the largest connected component.
  bool largest_component = false;
  /// Worker threads over slabs of slices; 0 picks the hardware concurrency.
  unsigned threads = 0;
};

namespace detail {

struct SlabOutput {
  std::vector<std::uint64_t> edge_ids;  // one per emitted vertex slot, three per triangle
};

/// Global id of the grid edge starting at (x, y, z) along `axis`.
inline std::uint64_t edge_id(const VolumeGrid& g, int x, int y, int z, int axis) {
  return static_cast<std::uint64_t>(g.index(x, y, z)) * 3 + static_cast<std::uint64_t>(axis);
}

inline void march_slab(const VolumeGrid& g, double iso, int z_begin, int z_end, SlabOutput& out) {
  // Corner offsets and, per cell edge, the lower grid point and axis of the matching grid edge.
  static constexpr int kEdgeBase[12][4] = {{0, 0, 0, 0}, {1, 0, 0, 1}, {0, 1, 0, 0}, {0, 0, 0, 1},
                                           {0, 0, 1, 0}, {1, 0, 1, 1}, {0, 1, 1, 0}, {0, 0, 1, 1},
                                           {0, 0, 0, 2}, {1, 0, 0, 2}, {1, 1, 0, 2}, {0, 1, 0, 2}};
  for (int z = z_begin; z < z_end; ++z)
    for (int y = 0; y + 1 < g.ny(); ++y)
      for (int x = 0; x + 1 < g.nx(); ++x) {
        int cube = 0;
        for (int c = 0; c < 8; ++c)
          if (g.at(x + mc::kCorner[c][0], y + mc::kCorner[c][1], z + mc::kCorner[c][2]) < iso) cube |= 1 << c;
        if (mc::kEdgeTable[cube] == 0) continue;
        const auto& row = mc::kTriTable[cube];
        for (int k = 0; row[k] != -1; k += 3)
          for (int j = 0; j < 3; ++j) {
            // Table winding puts normals on the side of the below-iso corners.
            const auto* b = kEdgeBase[row[k + j]];
            out.edge_ids.push_back(edge_id(g, x + b[0], y + b[1], z + b[2], b[3]));
          }
      }
}

/// Interpolated crossing on a grid edge. Depends only on the edge, so every cell sharing it
/// gets a bitwise-identical point.
inline Vec3 edge_vertex(const VolumeGrid& g, std::uint64_t id, double iso) {
  const auto axis = static_cast<int>(id % 3);
  const auto flat = static_cast<std::size_t>(id / 3);
  const int x = static_cast<int>(flat % g.nx());
  const int y = static_cast<int>((flat / g.nx()) % g.ny());
  const int z = static_cast<int>(flat / (static_cast<std::size_t>(g.nx()) * g.ny()));
  const int dx = axis == 0, dy = axis == 1, dz = axis == 2;
  const double v0 = g.at(x, y, z);
  const double v1 = g.at(x + dx, y + dy, z + dz);
  const double t = (iso - v0) / (v1 - v0);
  return g.position(x + t * dx, y + t * dy, z + t * dz);
}

}  // namespace detail

/// Standard 256-case Marching Cubes. A corner is inside when its value is below `iso`; output
/// normals point toward lower values. Vertices are shared between cells through their grid
/// edge, so a surface that stays clear of the grid boundary comes out closed.
inline IsoMesh marching_cubes(const VolumeGrid& g, double iso, const MarchingCubesOptions& opt = {}) {
  IsoMesh out;
  out.iso = iso;
  out.source_id = g.id();
  const auto [lo, hi] = g.value_range();
  if (!(iso > lo && iso < hi)) {
    out.status = IsoStatus::OutOfRange;
    out.warning = "iso value " + std::to_string(iso) + " is outside the data range (" + std::to_string(lo) + ", " +
                  std::to_string(hi) + "); the mesh is empty";
    return out;
  }

  const int cells_z = g.nz() - 1;
  unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(cells_z));
  std::vector<detail::SlabOutput> slabs(threads);
  auto slab_range = [&](unsigned s) {
    return std::pair{static_cast<int>(cells_z * static_cast<long long>(s) / threads),
                     static_cast<int>(cells_z * static_cast<long long>(s + 1) / threads)};
  };
  if (threads == 1) {
    detail::march_slab(g, iso, 0, cells_z, slabs[0]);
  } else {
    std::vector<std::thread> pool;
    for (unsigned s = 0; s < threads; ++s) {
      const auto [z0, z1] = slab_range(s);
      pool.emplace_back([&, s, z0, z1] { detail::march_slab(g, iso, z0, z1, slabs[s]); });
    }
    for (auto& t : pool) t.join();
  }

  // Assemble in slab order so the result does not depend on the thread count.
  std::unordered_map<std::uint64_t, std::uint32_t> index_of;
  std::vector<Vec3> vertices;
  std::vector<TriIndex> triangles;
  for (const auto& slab : slabs) {
    for (std::size_t i = 0; i < slab.edge_ids.size(); i += 3) {
      TriIndex t{};
      for (int j = 0; j < 3; ++j) {
        const auto id = slab.edge_ids[i + j];
        auto [it, inserted] = index_of.try_emplace(id, static_cast<std::uint32_t>(vertices.size()));
        if (inserted) vertices.push_back(detail::edge_vertex(g, id, iso));
        t[j] = it->second;
      }
      triangles.push_back(t);
    }
  }
  out.mesh = TriMesh::cleaned(vertices, triangles, g.id().empty() ? "isosurface" : g.id());
  if (opt.largest_component && !out.mesh.empty()) out.mesh = geom::largest_component(out.mesh);
  return out;
}

}  // namespace ebrt::ct
