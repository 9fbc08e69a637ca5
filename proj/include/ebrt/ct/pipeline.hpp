#pragma once

#include <filesystem>
#include <optional>

#include "ebrt/ct/decimate.hpp"
#include "ebrt/ct/marching_cubes.hpp"
#include "ebrt/ct/slice_stack.hpp"
#include "ebrt/geometry/mesh_io.hpp"

namespace ebrt::ct {

struct ReconstructOptions {
  double iso = kDefaultSkinIso;
  /// Triangle budget after decimation; unset or not below the extracted count leaves it alone.
  std::optional<std::size_t> target_triangles;
  bool largest_component = true;
  unsigned threads = 0;
};

/// Slice stack to scene-ready patient surface.
inline IsoMesh reconstruct(const VolumeGrid& g, const ReconstructOptions& opt = {}) {
  IsoMesh m = marching_cubes(g, opt.iso, {opt.largest_component, opt.threads});
  if (m.status != IsoStatus::Ok) return m;
  if (opt.target_triangles && *opt.target_triangles < m.mesh.triangle_count())
    m = decimate(m, std::max<std::size_t>(*opt.target_triangles, 4));
  return m;
}

inline IsoMesh reconstruct(const std::filesystem::path& stack_dir, const ReconstructOptions& opt = {}) {
  return reconstruct(load_slice_stack(stack_dir), opt);
}

/// Writes the surface as STL or OBJ, chosen by extension.
inline void export_mesh(const IsoMesh& m, const std::filesystem::path& p) {
  if (m.mesh.empty()) throw InvalidArgument("cannot export an empty mesh");
  geom::save_mesh(m.mesh, p);
}

}  // namespace ebrt::ct
