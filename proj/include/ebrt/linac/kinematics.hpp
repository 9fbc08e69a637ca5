#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ebrt/collision/collision_mesh.hpp"
#include "ebrt/core/error.hpp"
#include "ebrt/linac/machine.hpp"

namespace ebrt::linac {

using collision::ComponentRole;
using collision::PlacedComponent;

inline constexpr const char* kGantryId = "gantry";
inline constexpr const char* kCollimatorId = "collimator";
inline constexpr const char* kCouchId = "couch";
inline constexpr const char* kCouchBaseId = "couch_base";
inline constexpr const char* kPatientId = "patient";

inline MachineState clamp_state(const MotionLimits& l, MachineState s) {
  s.gantry_deg = l.gantry_deg.clamp(s.gantry_deg);
  s.collimator_deg = l.collimator_deg.clamp(s.collimator_deg);
  s.couch_rotation_deg = l.couch_rotation_deg.clamp(s.couch_rotation_deg);
  s.couch_lateral_mm = l.couch_lateral_mm.clamp(s.couch_lateral_mm);
  s.couch_longitudinal_mm = l.couch_longitudinal_mm.clamp(s.couch_longitudinal_mm);
  s.couch_vertical_mm = l.couch_vertical_mm.clamp(s.couch_vertical_mm);
  return s;
}

inline MachineState clamp_state(const MachineDescription& d, const MachineState& s) {
  return clamp_state(d.limits(), s);
}

inline bool within_limits(const MotionLimits& l, const MachineState& s) {
  return clamp_state(l, s) == s;
}

// Axis transforms. Gantry 0 points the beam down; positive gantry angles are clockwise seen
// from the couch foot, which is a positive rotation about +y.

inline Transform gantry_transform(const MachineState& s) { return Transform::rot_y(s.gantry_deg); }

inline Transform collimator_transform(const MachineState& s) {
  return gantry_transform(s) * Transform::rot_z(s.collimator_deg);
}

inline Transform couch_transform(const MachineState& s) {
  return Transform::rot_z(s.couch_rotation_deg) *
         Transform::translate(s.couch_lateral_mm, s.couch_longitudinal_mm, s.couch_vertical_mm);
}

/// The couch base only turns with the isocentric rotation.
inline Transform couch_base_transform(const MachineState& s) {
  return Transform::rot_z(s.couch_rotation_deg);
}

inline Transform mount_transform(Mount m, const MachineState& s) {
  return m == Mount::Couch ? couch_transform(s) : collimator_transform(s);
}

/// A patient surface riding on the couch. `offset` maps the mesh into the couch frame.
struct PatientPlacement {
  CollisionMeshPtr mesh;
  Transform offset;
};

/// Couch-frame offset that puts the mesh's area centroid over the couch mount point (x and y)
/// and rests its lowest vertex on the mount plane.
inline Transform default_patient_offset(const TriMesh& m, const Transform& couch_mount = {}) {
  if (m.empty()) throw InvalidArgument("patient mesh is empty");
  Vec3 centroid;
  double area = 0.0;
  for (std::size_t i = 0; i < m.triangle_count(); ++i) {
    const auto t = m.triangle(i);
    const double a = geom::triangle_area(t);
    centroid += (t[0] + t[1] + t[2]) * (a / 3.0);
    area += a;
  }
  centroid = centroid / area;
  const double bottom = geom::mesh_aabb(m).min.z;
  return couch_mount * Transform::translate(-centroid.x, -centroid.y, -bottom);
}

/// World placements for one machine state. Attachments and the patient inherit the transform
/// of the component they are mounted on. In strict mode an out-of-limit state is an error;
/// otherwise it is clamped first.
inline std::vector<PlacedComponent> forward_kinematics(const MachineDescription& d, const MachineState& state,
                                                       std::span<const Attachment> attachments = {},
                                                       const std::optional<PatientPlacement>& patient = {},
                                                       bool strict = false) {
  if (strict && !within_limits(d.limits(), state))
    throw InvalidArgument("machine state outside the limits of '" + d.id() + "'");
  const MachineState s = clamp_state(d, state);
  for (std::size_t i = 0; i < attachments.size(); ++i) {
    if (!attachments[i].mesh || attachments[i].mesh->mesh().empty())
      throw InvalidArgument("attachment '" + attachments[i].id + "' has no mesh");
    for (std::size_t j = 0; j < i; ++j)
      if (attachments[i].id == attachments[j].id)
        throw Conflict("attachment '" + attachments[i].id + "' listed twice");
  }
  const Transform couch = couch_transform(s);
  const Transform coll = collimator_transform(s);

  std::vector<PlacedComponent> out;
  out.reserve(5 + attachments.size());
  out.push_back({kGantryId, gantry_transform(s), d.gantry(), ComponentRole::Gantry, true});
  out.push_back({kCollimatorId, coll, d.collimator(), ComponentRole::Collimator, true});
  out.push_back({kCouchId, couch, d.couch_top(), ComponentRole::CouchTop, true});
  out.push_back({kCouchBaseId, couch_base_transform(s), d.couch_base(), ComponentRole::CouchBase, true});
  for (const auto& a : attachments) {
    const bool on_couch = a.mount == Mount::Couch;
    out.push_back({a.id, (on_couch ? couch : coll) * a.offset, a.mesh,
                   on_couch ? ComponentRole::CouchAttachment : ComponentRole::CollimatorAttachment, true});
  }
  if (patient) {
    if (!patient->mesh || patient->mesh->mesh().empty()) throw InvalidArgument("patient mesh is empty");
    out.push_back({kPatientId, couch * patient->offset, patient->mesh, ComponentRole::Patient, true});
  }
  return out;
}

/// Closed beam volume in the collimator frame: apex at the source, the field rectangle at the
/// isocentre plane, continued `extension_mm` beyond it.
inline TriMesh beam_frustum_local(double sad_mm, double field_x_mm, double field_y_mm, double extension_mm) {
  if (!(field_x_mm > 0.0) || !(field_y_mm > 0.0)) throw InvalidArgument("field size must be positive");
  if (!(sad_mm > 0.0)) throw InvalidArgument("SAD must be positive");
  if (!(extension_mm > 0.0)) throw InvalidArgument("beam extension must be positive");
  const double hx = field_x_mm / 2.0;
  const double hy = field_y_mm / 2.0;
  const double k = (sad_mm + extension_mm) / sad_mm;
  std::vector<Vec3> v{{0, 0, sad_mm},
                      {-hx, -hy, 0}, {hx, -hy, 0}, {hx, hy, 0}, {-hx, hy, 0},
                      {-hx * k, -hy * k, -extension_mm}, {hx * k, -hy * k, -extension_mm},
                      {hx * k, hy * k, -extension_mm}, {-hx * k, hy * k, -extension_mm}};
  std::vector<geom::TriIndex> t;
  for (std::uint32_t i = 0; i < 4; ++i) {
    const std::uint32_t a = 1 + i;
    const std::uint32_t b = 1 + (i + 1) % 4;
    t.push_back({0, a, b});
    t.push_back({a, b + 4, b});
    t.push_back({a, a + 4, b + 4});
  }
  t.push_back({5, 7, 6});
  t.push_back({5, 8, 7});
  return TriMesh(std::move(v), std::move(t), "beam");
}

/// The beam volume placed by the gantry and collimator rotations (world frame).
inline TriMesh beam_frustum(const MachineDescription& d, const MachineState& state,
                            std::optional<double> extension_mm = {}) {
  const MachineState s = clamp_state(d, state);
  return beam_frustum_local(d.sad_mm(), s.field_x_mm, s.field_y_mm,
                            extension_mm.value_or(d.spec().beam_extension_mm))
      .transformed(collimator_transform(s));
}

inline Vec3 source_position(const MachineDescription& d, const MachineState& s) {
  return collimator_transform(clamp_state(d, s)).apply({0, 0, d.sad_mm()});
}

/// Machine state plus installed accessories and patient: everything forward kinematics needs.
class Scene {
 public:
  explicit Scene(MachinePtr machine) : machine_(std::move(machine)) {
    if (!machine_) throw InvalidArgument("scene needs a machine");
  }

  const MachineDescription& machine() const { return *machine_; }
  const MachinePtr& machine_ptr() const { return machine_; }
  const MachineState& state() const { return state_; }
  const std::vector<Attachment>& attachments() const { return attachments_; }
  const std::optional<PatientPlacement>& patient() const { return patient_; }

  /// Stores the state clamped to the machine limits; returns the stored value.
  const MachineState& set_state(const MachineState& s, bool strict = false) {
    if (strict && !within_limits(machine_->limits(), s))
      throw InvalidArgument("machine state outside the limits of '" + machine_->id() + "'");
    if (!(s.field_x_mm > 0.0) || !(s.field_y_mm > 0.0)) throw InvalidArgument("field size must be positive");
    state_ = clamp_state(*machine_, s);
    return state_;
  }

  bool has_attachment(const std::string& id) const {
    return std::any_of(attachments_.begin(), attachments_.end(), [&](const auto& a) { return a.id == id; });
  }

  void attach(const Attachment& a) {
    if (has_attachment(a.id)) throw Conflict("attachment '" + a.id + "' is already installed");
    if (!a.mesh || a.mesh->mesh().empty()) throw InvalidArgument("attachment '" + a.id + "' has no mesh");
    if (a.id == kGantryId || a.id == kCollimatorId || a.id == kCouchId || a.id == kCouchBaseId ||
        a.id == kPatientId)
      throw InvalidArgument("attachment id '" + a.id + "' is reserved");
    attachments_.push_back(a);
  }

  /// Installs an accessory from the machine's catalogue.
  void attach(const std::string& id) { attach(machine_->attachment(id)); }

  void detach(const std::string& id) {
    const auto it = std::find_if(attachments_.begin(), attachments_.end(), [&](const auto& a) { return a.id == id; });
    if (it == attachments_.end()) throw NotFound("attachment '" + id + "' is not installed");
    attachments_.erase(it);
  }

  /// Places a patient mesh on the couch; without an offset it is centred on the couch mount.
  void set_patient(CollisionMeshPtr mesh, std::optional<Transform> offset = {}) {
    if (!mesh || mesh->mesh().empty()) throw InvalidArgument("patient mesh is empty");
    const Transform o = offset ? *offset : default_patient_offset(mesh->mesh(), machine_->mount(Mount::Couch));
    patient_ = PatientPlacement{std::move(mesh), o};
  }

  void clear_patient() { patient_.reset(); }

  std::vector<PlacedComponent> placed() const {
    return forward_kinematics(*machine_, state_, attachments_, patient_);
  }

  TriMesh beam() const { return beam_frustum(*machine_, state_); }

  bool operator==(const Scene& o) const {
    if (machine_ != o.machine_ || !(state_ == o.state_) || attachments_.size() != o.attachments_.size())
      return false;
    for (std::size_t i = 0; i < attachments_.size(); ++i)
      if (attachments_[i].id != o.attachments_[i].id || attachments_[i].mesh != o.attachments_[i].mesh ||
          attachments_[i].offset != o.attachments_[i].offset)
        return false;
    if (patient_.has_value() != o.patient_.has_value()) return false;
    return !patient_ || (patient_->mesh == o.patient_->mesh && patient_->offset == o.patient_->offset);
  }

 private:
  MachinePtr machine_;
  MachineState state_;
  std::vector<Attachment> attachments_;
  std::optional<PatientPlacement> patient_;
};

/// Value-style wrappers: return a modified copy.
inline Scene attach(Scene s, const Attachment& a) {
  s.attach(a);
  return s;
}

inline Scene detach(Scene s, const std::string& id) {
  s.detach(id);
  return s;
}

}  // namespace ebrt::linac
