#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ebrt/geometry/mesh_io.hpp"
#include "ebrt/linac/machine.hpp"

// Representative treatment machines built from dimension tables. The dimensions are plausible
// for the machine class, not measurements of any specific unit.

namespace ebrt::linac {

namespace detail {

inline Part box(Vec3 min, Vec3 max, Transform placement = {}) { return {BoxPart{min, max}, placement}; }

inline Part cylinder(double r, double z0, double z1, Transform placement = {}) {
  return {CylinderPart{r, z0, z1}, placement};
}

/// Cylinder whose axis runs along world +y from y0 to y1.
inline Part cylinder_y(double r, double y0, double y1) { return cylinder(r, y0, y1, Transform::rot_x(-90)); }

/// Four posts joined by a top ring, standing on the mount plane.
inline std::vector<Part> head_frame_parts(double half_x, double half_y, double height, double bar) {
  const double h = bar / 2;
  return {box({-half_x - h, -half_y - h, 0}, {-half_x + h, -half_y + h, height - bar}),
          box({half_x - h, -half_y - h, 0}, {half_x + h, -half_y + h, height - bar}),
          box({-half_x - h, half_y - h, 0}, {-half_x + h, half_y + h, height - bar}),
          box({half_x - h, half_y - h, 0}, {half_x + h, half_y + h, height - bar}),
          box({-half_x - h, -half_y - h, height - bar + 1}, {half_x + h, -half_y + h, height}),
          box({-half_x - h, half_y - h, height - bar + 1}, {half_x + h, half_y + h, height}),
          box({-half_x - h, -half_y + h + 1, height - bar + 1}, {-half_x + h, half_y - h - 1, height}),
          box({half_x - h, -half_y + h + 1, height - bar + 1}, {half_x + h, half_y - h - 1, height})};
}

inline std::vector<Part> breast_board_parts(double half_x, double length, double incline_deg) {
  const auto tilt = Transform::rot_x(incline_deg);
  return {box({-half_x, -length / 2, 0}, {half_x, length / 2, 20}, Transform::translate(0, 0, 90) * tilt),
          box({-half_x + 20, length / 2 - 60, 0}, {half_x - 20, length / 2 - 40, 150}),
          box({-half_x + 20, -length / 2 + 40, 0}, {half_x - 20, -length / 2 + 60, 50})};
}

/// Square applicator hanging below the collimator mount (negative local z).
inline std::vector<Part> electron_cone_parts(double inner_half, double wall, double length) {
  const double o = inner_half + wall;
  const double z0 = -length;
  const double z1 = -20;
  return {box({inner_half, -o, z0}, {o, o, z1}),
          box({-o, -o, z0}, {-inner_half, o, z1}),
          box({-inner_half + 1, inner_half, z0}, {inner_half - 1, o, z1}),
          box({-inner_half + 1, -o, z0}, {inner_half - 1, -inner_half, z1}),
          box({-o - 60, -o - 60, z1 + 1}, {o + 60, o + 60, 0})};
}

inline std::vector<Part> block_tray_parts(double half, double drop) {
  return {box({-half, -half, -drop}, {half, half, -drop + 8}),
          box({-half - 12, -half, -drop + 9}, {-half - 2, half, 0}),
          box({half + 2, -half, -drop + 9}, {half + 12, half, 0})};
}

}  // namespace detail

inline MachineSpec varian_trilogy_spec() {
  using detail::box;
  using detail::cylinder;
  MachineSpec s;
  s.id = "varian_trilogy";
  s.name = "Varian Trilogy class linac";
  s.sad_mm = 1000.0;
  s.tessellation_mm = 22.0;
  s.beam_extension_mm = 400.0;
  s.limits.couch_lateral_mm = {-250, 250};
  s.limits.couch_longitudinal_mm = {-1000, 700};
  s.limits.couch_vertical_mm = {-700, 500};
  s.collimator_mount = Transform::translate(0, 0, 420);
  s.gantry = {detail::cylinder_y(800, 1300, 1700),
              box({-300, 340, 550}, {300, 1360, 1240}),
              box({-380, -380, 650}, {380, 360, 1230})};
  s.collimator = {cylinder(300, 420, 649)};
  s.couch_top = {box({-265, -1900, -60}, {265, 600, 0})};
  s.couch_base = {box({-300, -1500, -1300}, {300, -900, -850}),
                  box({-150, -1300, -849}, {150, -1100, -500})};
  s.attachments = {
      {"head_frame", "Stereotactic head frame", Mount::Couch, Transform::translate(0, 450, 0),
       detail::head_frame_parts(150, 110, 260, 24)},
      {"breast_board", "Breast board", Mount::Couch, Transform::translate(0, -350, 0),
       detail::breast_board_parts(250, 600, 15)},
      {"electron_cone", "Electron cone 15x15", Mount::Collimator, Transform::identity(),
       detail::electron_cone_parts(75, 10, 330)},
      {"stereotactic_cone", "Stereotactic cone", Mount::Collimator, Transform::identity(),
       {cylinder(35, -230, -10), cylinder(90, -9, 0)}},
      {"block_tray", "Block tray", Mount::Collimator, Transform::identity(), detail::block_tray_parts(180, 80)},
  };
  return s;
}

inline MachineSpec novalis_spec() {
  using detail::box;
  using detail::cylinder;
  MachineSpec s;
  s.id = "novalis";
  s.name = "Novalis class radiosurgery linac";
  s.sad_mm = 1000.0;
  s.tessellation_mm = 22.0;
  s.beam_extension_mm = 400.0;
  s.limits.couch_lateral_mm = {-230, 230};
  s.limits.couch_longitudinal_mm = {-1100, 650};
  s.limits.couch_vertical_mm = {-650, 450};
  s.collimator_mount = Transform::translate(0, 0, 380);
  s.gantry = {detail::cylinder_y(750, 1300, 1650),
              box({-260, 300, 500}, {260, 1320, 1190}),
              box({-320, -330, 600}, {320, 310, 1180})};
  s.collimator = {cylinder(250, 380, 599)};
  s.couch_top = {box({-255, -2000, -50}, {255, 550, 0})};
  s.couch_base = {box({-280, -1600, -1300}, {280, -1000, -850}),
                  box({-140, -1400, -849}, {140, -1200, -450})};
  s.attachments = {
      {"head_frame", "Stereotactic head frame", Mount::Couch, Transform::translate(0, 420, 0),
       detail::head_frame_parts(140, 105, 250, 22)},
      {"breast_board", "Breast board", Mount::Couch, Transform::translate(0, -380, 0),
       detail::breast_board_parts(240, 560, 12)},
      {"stereotactic_cone", "Stereotactic cone", Mount::Collimator, Transform::identity(),
       {cylinder(25, -240, -10), cylinder(70, -9, 0)}},
      {"block_tray", "Block tray", Mount::Collimator, Transform::identity(), detail::block_tray_parts(150, 70)},
  };
  return s;
}

inline PhantomSpec elliptical_phantom_spec() {
  PhantomSpec p;
  p.id = "elliptical_phantom";
  p.name = "Elliptical phantom";
  p.semi_axes = {150.0, 250.0, 100.0};
  p.tessellation_mm = 10.0;
  return p;
}

/// Machines and phantoms available to scenes, keyed by id.
struct Catalog {
  std::vector<MachinePtr> machines;
  std::vector<PhantomSpec> phantoms;
  double detail_scale = 1.0;

  const MachinePtr& machine(const std::string& id) const {
    for (const auto& m : machines)
      if (m->id() == id) return m;
    throw NotFound("unknown machine '" + id + "'");
  }

  const PhantomSpec* phantom(const std::string& id) const {
    for (const auto& p : phantoms)
      if (p.id == id) return &p;
    return nullptr;
  }

  /// Phantom mesh, built once per id and shared.
  collision::CollisionMeshPtr phantom_mesh(const std::string& id) const {
    const PhantomSpec* p = phantom(id);
    if (!p) throw NotFound("unknown phantom '" + id + "'");
    std::lock_guard lock(cache_->mutex);
    auto& slot = cache_->phantoms[id];
    if (!slot) slot = collision::make_collision_mesh(build_phantom(*p, detail_scale));
    return slot;
  }

 private:
  struct Cache {
    std::mutex mutex;
    std::map<std::string, collision::CollisionMeshPtr> phantoms;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

/// The built-in machines and phantom. `detail_scale` > 1 coarsens every tessellation, for
/// tests; catalogues are built once per scale and shared.
inline std::shared_ptr<const Catalog> builtin_catalog(double detail_scale = 1.0) {
  static std::mutex mutex;
  static std::map<double, std::shared_ptr<const Catalog>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[detail_scale];
  if (!slot) {
    auto c = std::make_shared<Catalog>();
    c->detail_scale = detail_scale;
    c->machines.push_back(std::make_shared<const MachineDescription>(varian_trilogy_spec(), detail_scale));
    c->machines.push_back(std::make_shared<const MachineDescription>(novalis_spec(), detail_scale));
    c->phantoms.push_back(elliptical_phantom_spec());
    slot = std::move(c);
  }
  return slot;
}

inline std::vector<MachinePtr> builtin_machines(double detail_scale = 1.0) {
  return builtin_catalog(detail_scale)->machines;
}

/// Loads every *.json machine or phantom file in `dir` (sorted by file name).
inline std::shared_ptr<const Catalog> load_catalog(const std::filesystem::path& dir, double detail_scale = 1.0) {
  if (!std::filesystem::is_directory(dir)) throw IoError("machine directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  auto c = std::make_shared<Catalog>();
  c->detail_scale = detail_scale;
  for (const auto& f : files) {
    json j;
    try {
      j = json::parse(geom::read_file_bytes(f));
    } catch (const json::parse_error& e) {
      throw ParseError(f.filename().string() + ": " + e.what());
    }
    const std::string kind = j.value("kind", "");
    if (kind == "phantom") {
      c->phantoms.push_back(phantom_spec_from_json(j));
    } else {
      auto m = std::make_shared<const MachineDescription>(machine_spec_from_json(j), detail_scale);
      for (const auto& other : c->machines)
        if (other->id() == m->id()) throw ParseError("duplicate machine id '" + m->id() + "'");
      c->machines.push_back(std::move(m));
    }
  }
  if (c->machines.empty()) throw ParseError("no machine files in " + dir.string());
  return c;
}

/// Writes one JSON file per built-in machine and phantom.
inline void export_builtin(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& spec : {varian_trilogy_spec(), novalis_spec()})
    geom::write_file_bytes(dir / (spec.id + ".json"), machine_spec_to_json(spec).dump(2) + "\n");
  const auto p = elliptical_phantom_spec();
  geom::write_file_bytes(dir / (p.id + ".json"), phantom_spec_to_json(p).dump(2) + "\n");
}

}  // namespace ebrt::linac
