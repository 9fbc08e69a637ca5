#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ebrt/collision/collision_mesh.hpp"
#include "ebrt/core/error.hpp"
#include "ebrt/geometry/primitives.hpp"
#include "ebrt/geometry/transform.hpp"
#include "ebrt/geometry/tri_mesh.hpp"

namespace ebrt::linac {

using collision::CollisionMeshPtr;
using geom::Transform;
using geom::TriMesh;
using geom::Vec3;
using json = nlohmann::json;

inline constexpr const char* kMachineSchema = "ebrt-machine/1";

struct Range {
  double min = 0.0;
  double max = 0.0;

  double clamp(double v) const { return std::clamp(v, min, max); }
  bool contains(double v) const { return v >= min && v <= max; }
  bool operator==(const Range&) const = default;
};

/// Per-axis motion limits: degrees for rotations, millimetres for translations.
struct MotionLimits {
  Range gantry_deg{-185.0, 185.0};
  Range collimator_deg{-175.0, 175.0};
  Range couch_rotation_deg{-95.0, 95.0};
  Range couch_lateral_mm{-250.0, 250.0};
  Range couch_longitudinal_mm{-1000.0, 700.0};
  Range couch_vertical_mm{-700.0, 500.0};

  bool operator==(const MotionLimits&) const = default;
};

/// The articulated axes plus the field size at isocentre.
struct MachineState {
  double gantry_deg = 0.0;
  double collimator_deg = 0.0;
  double couch_lateral_mm = 0.0;
  double couch_longitudinal_mm = 0.0;
  double couch_vertical_mm = 0.0;
  double couch_rotation_deg = 0.0;
  double field_x_mm = 100.0;
  double field_y_mm = 100.0;

  bool operator==(const MachineState&) const = default;
};

enum class Mount { Collimator, Couch };

inline const char* to_string(Mount m) { return m == Mount::Couch ? "couch" : "collimator"; }

inline Mount mount_from_string(const std::string& s) {
  if (s == "couch") return Mount::Couch;
  if (s == "collimator") return Mount::Collimator;
  throw ParseError("unknown mount '" + s + "' (expected couch or collimator)");
}

/// An accessory ready to place: `offset` is relative to the mounting component's frame and
/// already includes the machine's mount point.
struct Attachment {
  std::string id;
  std::string name;
  CollisionMeshPtr mesh;
  Mount mount = Mount::Couch;
  Transform offset;
};

// ------------------------------------------------------------------ parametric parts

struct BoxPart {
  Vec3 min;
  Vec3 max;
};

/// Cylinder along the local z axis.
struct CylinderPart {
  double radius = 0.0;
  double z0 = 0.0;
  double z1 = 0.0;
};

struct EllipsoidPart {
  Vec3 semi_axes;
};

struct Part {
  std::variant<BoxPart, CylinderPart, EllipsoidPart> shape;
  Transform placement;
};

inline TriMesh build_part(const Part& p, double max_edge) {
  TriMesh m = std::visit(
      [&](const auto& s) -> TriMesh {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BoxPart>) return geom::make_box(s.min, s.max, max_edge);
        else if constexpr (std::is_same_v<T, CylinderPart>) return geom::make_cylinder(s.radius, s.z0, s.z1, max_edge);
        else return geom::make_ellipsoid(s.semi_axes, max_edge);
      },
      p.shape);
  return p.placement == Transform::identity() ? m : m.transformed(p.placement);
}

inline TriMesh build_parts(const std::vector<Part>& parts, double max_edge, const std::string& name) {
  if (parts.empty()) throw InvalidArgument("component '" + name + "' has no parts");
  std::vector<TriMesh> meshes;
  meshes.reserve(parts.size());
  for (const auto& p : parts) meshes.push_back(build_part(p, max_edge));
  return TriMesh::merged(meshes, name);
}

struct AttachmentSpec {
  std::string id;
  std::string name;
  Mount mount = Mount::Couch;
  Transform offset;  // relative to the mount point
  std::vector<Part> parts;
};

/// Dimension tables of one linac, as stored in a machine file.
struct MachineSpec {
  std::string id;
  std::string name;
  double sad_mm = 1000.0;
  double tessellation_mm = 20.0;
  double beam_extension_mm = 400.0;
  MotionLimits limits;
  Transform couch_mount;
  Transform collimator_mount;
  std::vector<Part> gantry;
  std::vector<Part> collimator;
  std::vector<Part> couch_top;
  std::vector<Part> couch_base;
  std::vector<AttachmentSpec> attachments;
};

/// Patient stand-in of known geometry.
struct PhantomSpec {
  std::string id;
  std::string name;
  Vec3 semi_axes{150.0, 250.0, 100.0};
  double tessellation_mm = 10.0;
};

// ------------------------------------------------------------------ built description

/// Immutable machine with generated meshes. Component meshes are given in their home frames:
/// the world frame with every axis at zero.
class MachineDescription {
 public:
  MachineDescription(MachineSpec spec, double detail_scale = 1.0) : spec_(std::move(spec)) {
    validate();
    if (!(detail_scale > 0.0)) throw InvalidArgument("detail scale must be positive");
    const double edge = spec_.tessellation_mm * detail_scale;
    gantry_ = collision::make_collision_mesh(build_parts(spec_.gantry, edge, "gantry"));
    collimator_ = collision::make_collision_mesh(build_parts(spec_.collimator, edge, "collimator"));
    couch_top_ = collision::make_collision_mesh(build_parts(spec_.couch_top, edge, "couch"));
    couch_base_ = collision::make_collision_mesh(build_parts(spec_.couch_base, edge, "couch_base"));
    for (const auto& a : spec_.attachments) {
      const Transform& mount = a.mount == Mount::Couch ? spec_.couch_mount : spec_.collimator_mount;
      catalog_.push_back({a.id, a.name,
                          collision::make_collision_mesh(build_parts(a.parts, edge, a.id)), a.mount,
                          mount * a.offset});
    }
  }

  const MachineSpec& spec() const { return spec_; }
  const std::string& id() const { return spec_.id; }
  const std::string& name() const { return spec_.name; }
  double sad_mm() const { return spec_.sad_mm; }
  const MotionLimits& limits() const { return spec_.limits; }
  const Transform& mount(Mount m) const {
    return m == Mount::Couch ? spec_.couch_mount : spec_.collimator_mount;
  }

  const CollisionMeshPtr& gantry() const { return gantry_; }
  const CollisionMeshPtr& collimator() const { return collimator_; }
  const CollisionMeshPtr& couch_top() const { return couch_top_; }
  const CollisionMeshPtr& couch_base() const { return couch_base_; }
  const std::vector<Attachment>& catalog() const { return catalog_; }

  const Attachment& attachment(const std::string& id) const {
    for (const auto& a : catalog_)
      if (a.id == id) return a;
    throw NotFound("machine '" + spec_.id + "' has no attachment '" + id + "'");
  }

  /// Names accepted by mesh(): the four components plus every catalogue attachment.
  const CollisionMeshPtr& mesh(const std::string& component) const {
    if (component == "gantry") return gantry_;
    if (component == "collimator") return collimator_;
    if (component == "couch") return couch_top_;
    if (component == "couch_base") return couch_base_;
    return attachment(component).mesh;
  }

  std::size_t base_triangle_count() const {
    return gantry_->mesh().triangle_count() + collimator_->mesh().triangle_count() +
           couch_top_->mesh().triangle_count() + couch_base_->mesh().triangle_count();
  }

 private:
  void validate() const {
    if (spec_.id.empty()) throw InvalidArgument("machine id is empty");
    if (!(spec_.sad_mm > 0.0)) throw InvalidArgument("SAD must be positive");
    if (!(spec_.tessellation_mm > 0.0)) throw InvalidArgument("tessellation must be positive");
    if (!(spec_.beam_extension_mm >= 0.0)) throw InvalidArgument("beam extension must be non-negative");
    const auto& l = spec_.limits;
    for (const Range* r : {&l.gantry_deg, &l.collimator_deg, &l.couch_rotation_deg, &l.couch_lateral_mm,
                           &l.couch_longitudinal_mm, &l.couch_vertical_mm})
      if (!(r->min < r->max)) throw InvalidArgument("machine '" + spec_.id + "': limit min must be below max");
    for (std::size_t i = 0; i < spec_.attachments.size(); ++i) {
      if (spec_.attachments[i].id.empty()) throw InvalidArgument("attachment id is empty");
      for (std::size_t j = 0; j < i; ++j)
        if (spec_.attachments[i].id == spec_.attachments[j].id)
          throw InvalidArgument("duplicate attachment id '" + spec_.attachments[i].id + "'");
    }
  }

  MachineSpec spec_;
  CollisionMeshPtr gantry_, collimator_, couch_top_, couch_base_;
  std::vector<Attachment> catalog_;
};

using MachinePtr = std::shared_ptr<const MachineDescription>;

// ------------------------------------------------------------------ JSON

namespace detail {

inline double number(const json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) throw ParseError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

inline double number_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? number(j, key) : fallback;
}

inline std::string string_field(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw ParseError(std::string("field '") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

inline Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-element array");
  for (const auto& e : j)
    if (!e.is_number()) throw ParseError("expected numbers in 3-element array");
  const Vec3 v{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  if (!geom::is_finite(v)) throw ParseError("non-finite coordinate");
  return v;
}

inline json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Range range(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ParseError("a limit must be [min, max]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

/// {"translation_mm": [x,y,z], "rotation_deg": [rx,ry,rz]}; rotation applied first, as
/// rot_z * rot_y * rot_x. Missing fields default to zero.
inline Transform placement_from_json(const json& j) {
  Vec3 t, r;
  if (j.contains("translation_mm")) t = detail::vec3(j.at("translation_mm"));
  if (j.contains("rotation_deg")) r = detail::vec3(j.at("rotation_deg"));
  return Transform::translate(t) * Transform::from_euler_deg(r);
}

inline json placement_to_json(const Vec3& translation, const Vec3& rotation_deg) {
  return {{"translation_mm", detail::to_json(translation)}, {"rotation_deg", detail::to_json(rotation_deg)}};
}

/// Placements are written as the 4x4 row-major matrix so any rigid transform round-trips.
inline json transform_to_json(const Transform& t) {
  const auto m = t.matrix();
  return {{"matrix", std::vector<double>(m.begin(), m.end())}};
}

inline Transform transform_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("placement must be an object");
  if (j.contains("matrix")) {
    const auto& m = j.at("matrix");
    if (!m.is_array() || m.size() != 16) throw ParseError("matrix must have 16 entries");
    std::array<double, 16> a{};
    for (std::size_t i = 0; i < 16; ++i) {
      if (!m[i].is_number()) throw ParseError("matrix entries must be numbers");
      a[i] = m[i].get<double>();
    }
    try {
      return Transform::from_matrix(a, 1e-6);
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what());
    }
  }
  return placement_from_json(j);
}

inline Part part_from_json(const json& j) {
  const std::string shape = detail::string_field(j, "shape");
  Part p;
  if (j.contains("placement")) p.placement = transform_from_json(j.at("placement"));
  if (shape == "box") {
    const BoxPart b{detail::vec3(j.at("min_mm")), detail::vec3(j.at("max_mm"))};
    if (!(b.min.x < b.max.x && b.min.y < b.max.y && b.min.z < b.max.z))
      throw ParseError("box min must be below max on every axis");
    p.shape = b;
  } else if (shape == "cylinder") {
    const auto z = detail::range(j.at("z_mm"));
    const CylinderPart c{detail::number(j, "radius_mm"), z.min, z.max};
    if (!(c.radius > 0.0 && c.z0 < c.z1)) throw ParseError("cylinder needs radius > 0 and z0 < z1");
    p.shape = c;
  } else if (shape == "ellipsoid") {
    const EllipsoidPart e{detail::vec3(j.at("semi_axes_mm"))};
    if (!(e.semi_axes.x > 0 && e.semi_axes.y > 0 && e.semi_axes.z > 0))
      throw ParseError("ellipsoid semi-axes must be positive");
    p.shape = e;
  } else {
    throw ParseError("unknown part shape '" + shape + "'");
  }
  return p;
}

inline json part_to_json(const Part& p) {
  json j = std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BoxPart>)
          return {{"shape", "box"}, {"min_mm", detail::to_json(s.min)}, {"max_mm", detail::to_json(s.max)}};
        else if constexpr (std::is_same_v<T, CylinderPart>)
          return {{"shape", "cylinder"}, {"radius_mm", s.radius}, {"z_mm", {s.z0, s.z1}}};
        else
          return {{"shape", "ellipsoid"}, {"semi_axes_mm", detail::to_json(s.semi_axes)}};
      },
      p.shape);
  if (p.placement != Transform::identity()) j["placement"] = transform_to_json(p.placement);
  return j;
}

namespace detail {

inline std::vector<Part> parts_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ParseError(what + ": expected a non-empty list of parts");
  std::vector<Part> out;
  for (const auto& e : j) out.push_back(part_from_json(e));
  return out;
}

inline json parts_to_json(const std::vector<Part>& parts) {
  json a = json::array();
  for (const auto& p : parts) a.push_back(part_to_json(p));
  return a;
}

}  // namespace detail

inline MachineSpec machine_spec_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("machine file must be a JSON object");
  if (detail::string_field(j, "schema") != kMachineSchema)
    throw ParseError(std::string("unsupported machine schema (expected ") + kMachineSchema + ")");
  if (detail::string_field(j, "kind") != "linac") throw ParseError("machine file kind must be 'linac'");
  try {
    MachineSpec s;
    s.id = detail::string_field(j, "id");
    s.name = j.value("name", s.id);
    s.sad_mm = detail::number(j, "sad_mm");
    s.tessellation_mm = detail::number_or(j, "tessellation_mm", s.tessellation_mm);
    s.beam_extension_mm = detail::number_or(j, "beam_extension_mm", s.beam_extension_mm);
    if (j.contains("limits")) {
      const auto& l = j.at("limits");
      auto read = [&](const char* key, Range& r) {
        if (l.contains(key)) r = detail::range(l.at(key));
      };
      read("gantry_deg", s.limits.gantry_deg);
      read("collimator_deg", s.limits.collimator_deg);
      read("couch_rotation_deg", s.limits.couch_rotation_deg);
      read("couch_lateral_mm", s.limits.couch_lateral_mm);
      read("couch_longitudinal_mm", s.limits.couch_longitudinal_mm);
      read("couch_vertical_mm", s.limits.couch_vertical_mm);
    }
    if (j.contains("mounts")) {
      const auto& m = j.at("mounts");
      if (m.contains("couch")) s.couch_mount = transform_from_json(m.at("couch"));
      if (m.contains("collimator")) s.collimator_mount = transform_from_json(m.at("collimator"));
    }
    const auto& c = j.at("components");
    s.gantry = detail::parts_from_json(c.at("gantry"), "gantry");
    s.collimator = detail::parts_from_json(c.at("collimator"), "collimator");
    s.couch_top = detail::parts_from_json(c.at("couch_top"), "couch_top");
    s.couch_base = detail::parts_from_json(c.at("couch_base"), "couch_base");
    for (const auto& a : j.value("attachments", json::array())) {
      AttachmentSpec as;
      as.id = detail::string_field(a, "id");
      as.name = a.value("name", as.id);
      as.mount = mount_from_string(detail::string_field(a, "mount"));
      if (a.contains("offset")) as.offset = transform_from_json(a.at("offset"));
      as.parts = detail::parts_from_json(a.at("parts"), as.id);
      s.attachments.push_back(std::move(as));
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("machine file: ") + e.what());
  }
}

inline json limits_to_json(const MotionLimits& l) {
  auto r = [](const Range& x) { return json::array({x.min, x.max}); };
  return {{"gantry_deg", r(l.gantry_deg)},
          {"collimator_deg", r(l.collimator_deg)},
          {"couch_rotation_deg", r(l.couch_rotation_deg)},
          {"couch_lateral_mm", r(l.couch_lateral_mm)},
          {"couch_longitudinal_mm", r(l.couch_longitudinal_mm)},
          {"couch_vertical_mm", r(l.couch_vertical_mm)}};
}

inline json machine_spec_to_json(const MachineSpec& s) {
  json attachments = json::array();
  for (const auto& a : s.attachments)
    attachments.push_back({{"id", a.id},
                           {"name", a.name},
                           {"mount", to_string(a.mount)},
                           {"offset", transform_to_json(a.offset)},
                           {"parts", detail::parts_to_json(a.parts)}});
  return {{"schema", kMachineSchema},
          {"kind", "linac"},
          {"id", s.id},
          {"name", s.name},
          {"sad_mm", s.sad_mm},
          {"tessellation_mm", s.tessellation_mm},
          {"beam_extension_mm", s.beam_extension_mm},
          {"limits", limits_to_json(s.limits)},
          {"mounts", {{"couch", transform_to_json(s.couch_mount)}, {"collimator", transform_to_json(s.collimator_mount)}}},
          {"components",
           {{"gantry", detail::parts_to_json(s.gantry)},
            {"collimator", detail::parts_to_json(s.collimator)},
            {"couch_top", detail::parts_to_json(s.couch_top)},
            {"couch_base", detail::parts_to_json(s.couch_base)}}},
          {"attachments", attachments}};
}

inline PhantomSpec phantom_spec_from_json(const json& j) {
  if (detail::string_field(j, "schema") != kMachineSchema) throw ParseError("unsupported phantom schema");
  if (detail::string_field(j, "kind") != "phantom") throw ParseError("phantom file kind must be 'phantom'");
  PhantomSpec p;
  p.id = detail::string_field(j, "id");
  p.name = j.value("name", p.id);
  p.semi_axes = detail::vec3(j.at("semi_axes_mm"));
  p.tessellation_mm = detail::number_or(j, "tessellation_mm", p.tessellation_mm);
  if (!(p.semi_axes.x > 0 && p.semi_axes.y > 0 && p.semi_axes.z > 0 && p.tessellation_mm > 0))
    throw ParseError("phantom dimensions must be positive");
  return p;
}

inline json phantom_spec_to_json(const PhantomSpec& p) {
  return {{"schema", kMachineSchema},
          {"kind", "phantom"},
          {"id", p.id},
          {"name", p.name},
          {"semi_axes_mm", detail::to_json(p.semi_axes)},
          {"tessellation_mm", p.tessellation_mm}};
}

inline TriMesh build_phantom(const PhantomSpec& p, double detail_scale = 1.0) {
  return geom::make_ellipsoid(p.semi_axes, p.tessellation_mm * detail_scale, p.id);
}

// ------------------------------------------------------------------ state

inline json state_to_json(const MachineState& s) {
  return {{"gantry_deg", s.gantry_deg},
          {"collimator_deg", s.collimator_deg},
          {"couch_lateral_mm", s.couch_lateral_mm},
          {"couch_longitudinal_mm", s.couch_longitudinal_mm},
          {"couch_vertical_mm", s.couch_vertical_mm},
          {"couch_rotation_deg", s.couch_rotation_deg},
          {"field_mm", {s.field_x_mm, s.field_y_mm}}};
}

/// Applies the fields present in `j` on top of `base`. Unknown keys and non-finite values are
/// rejected so a typo never silently leaves an axis unchanged.
inline MachineState state_from_json(const json& j, MachineState base = {}) {
  if (!j.is_object()) throw ParseError("state must be a JSON object");
  auto num = [](const json& v, const std::string& key) {
    if (!v.is_number()) throw ParseError("state field '" + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError("state field '" + key + "' is not finite");
    return d;
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "gantry_deg") base.gantry_deg = num(v, key);
    else if (key == "collimator_deg") base.collimator_deg = num(v, key);
    else if (key == "couch_lateral_mm") base.couch_lateral_mm = num(v, key);
    else if (key == "couch_longitudinal_mm") base.couch_longitudinal_mm = num(v, key);
    else if (key == "couch_vertical_mm") base.couch_vertical_mm = num(v, key);
    else if (key == "couch_rotation_deg") base.couch_rotation_deg = num(v, key);
    else if (key == "field_mm") {
      if (!v.is_array() || v.size() != 2) throw ParseError("field_mm must be [x, y]");
      base.field_x_mm = num(v[0], key);
      base.field_y_mm = num(v[1], key);
    } else {
      throw ParseError("unknown state field '" + key + "'");
    }
  }
  return base;
}

}  // namespace ebrt::linac
