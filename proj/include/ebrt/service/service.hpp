#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <regex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebrt/collision/report_json.hpp"
#include "ebrt/ct/pipeline.hpp"
#include "ebrt/geometry/mesh_io.hpp"
#include "ebrt/linac/builtin.hpp"
#include "ebrt/linac/kinematics.hpp"
#include "ebrt/measure/measurement.hpp"
#include "ebrt/measure/scenario.hpp"

// Session-scoped simulator service, independent of the HTTP transport. Every method either
// returns a JSON body or throws an ebrt::Error that http_status() maps to a status code.

namespace ebrt::service {

using json = nlohmann::json;
using geom::Vec3;

inline int http_status(const std::exception& e) {
  if (dynamic_cast<const NotFound*>(&e)) return 404;
  if (dynamic_cast<const Conflict*>(&e)) return 409;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const InvalidArgument*>(&e)) return 422;
  return 500;
}

struct ServiceConfig {
  std::shared_ptr<const linac::Catalog> catalog;
  /// Machine for sessions created without one; the catalogue's first machine if absent.
  std::string default_machine = "varian_trilogy";
  /// Where scenarios are saved and replayed from.
  std::filesystem::path scenario_dir = "scenarios";
  std::size_t max_upload_bytes = 64u << 20;
  /// Default iso value for uploaded slice stacks.
  double default_iso = ct::kDefaultSkinIso;
  /// Triangle budget for uploaded slice-stack surfaces; 0 keeps the full extraction.
  std::size_t default_patient_triangles = 20000;

  /// Reads EBRT_MACHINES, EBRT_SCENARIOS and EBRT_MAX_UPLOAD_MB; unset variables keep defaults.
  static ServiceConfig from_environment() {
    ServiceConfig c;
    if (const char* dir = std::getenv("EBRT_MACHINES"); dir && *dir) c.catalog = linac::load_catalog(dir);
    if (const char* dir = std::getenv("EBRT_SCENARIOS"); dir && *dir) c.scenario_dir = dir;
    if (const char* mb = std::getenv("EBRT_MAX_UPLOAD_MB"); mb && *mb) {
      const long v = std::strtol(mb, nullptr, 10);
      if (v <= 0) throw InvalidArgument("EBRT_MAX_UPLOAD_MB must be a positive integer");
      c.max_upload_bytes = static_cast<std::size_t>(v) << 20;
    }
    return c;
  }
};

/// One uploaded form part.
struct UploadedFile {
  std::string field;
  std::string filename;
  std::string content;
};

class Service {
 public:
  explicit Service(ServiceConfig config) : config_(std::move(config)) {
    if (!config_.catalog) config_.catalog = linac::builtin_catalog();
  }

  const ServiceConfig& config() const { return config_; }
  const linac::Catalog& catalog() const { return *config_.catalog; }

  // ---------------------------------------------------------------- catalogue

  json list_machines() const {
    json machines = json::array();
    for (const auto& m : catalog().machines) {
      json atts = json::array();
      for (const auto& a : m->catalog())
        atts.push_back({{"id", a.id}, {"name", a.name}, {"mount", linac::to_string(a.mount)}});
      machines.push_back({{"id", m->id()},
                          {"name", m->name()},
                          {"sad_mm", m->sad_mm()},
                          {"limits", linac::limits_to_json(m->limits())},
                          {"components", {linac::kGantryId, linac::kCollimatorId, linac::kCouchId,
                                          linac::kCouchBaseId}},
                          {"attachments", atts}});
    }
    json phantoms = json::array();
    for (const auto& p : catalog().phantoms)
      phantoms.push_back({{"id", p.id}, {"name", p.name}, {"semi_axes_mm", {p.semi_axes.x, p.semi_axes.y, p.semi_axes.z}}});
    return {{"machines", machines}, {"phantoms", phantoms}};
  }

  /// Binary STL of a machine component or catalogue attachment, in its local frame.
  std::string component_mesh(const std::string& machine, const std::string& component) const {
    return geom::write_stl(catalog().machine(machine)->mesh(component)->mesh());
  }

  std::string phantom_mesh(const std::string& id) const {
    return geom::write_stl(catalog().phantom_mesh(id)->mesh());
  }

  // ---------------------------------------------------------------- sessions

  json create_session(const json& body) {
    if (!body.is_object()) throw ParseError("request body must be a JSON object");
    std::string machine = catalog().machines.front()->id();
    for (const auto& m : catalog().machines)
      if (m->id() == config_.default_machine) machine = m->id();
    if (body.contains("machine")) {
      if (!body.at("machine").is_string()) throw ParseError("'machine' must be a string");
      machine = body.at("machine").get<std::string>();
    }
    auto session = std::make_shared<Session>(catalog().machine(machine));
    if (body.contains("state")) session->scene.set_state(linac::state_from_json(body.at("state")));
    std::string id;
    {
      std::unique_lock lock(sessions_mutex_);
      do {
        id = new_id();
      } while (sessions_.count(id));
      session->id = id;
      sessions_[id] = session;
    }
    std::lock_guard lock(session->mutex);
    json out = session_json(*session);
    out["session"] = id;
    return out;
  }

  void delete_session(const std::string& id) {
    std::unique_lock lock(sessions_mutex_);
    if (!sessions_.erase(id)) throw NotFound("unknown session '" + id + "'");
  }

  std::size_t session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
  }

  json get_state(const std::string& id) const {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    return session_json(*s);
  }

  /// Partial state update, clamped to the machine limits, answered with fresh collision data.
  json put_state(const std::string& id, const json& body) {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    const auto next = linac::state_from_json(body, s->scene.state());
    s->scene.set_state(next);
    ++s->revision;
    json out = session_json(*s);
    out["collision"] = collision_section(*s);
    return out;
  }

  json add_attachment(const std::string& id, const json& body) {
    if (!body.is_object() || !body.contains("attachment") || !body.at("attachment").is_string())
      throw ParseError("body must be {\"attachment\": \"<id>\"}");
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    s->scene.attach(body.at("attachment").get<std::string>());
    ++s->revision;
    json out = session_json(*s);
    out["collision"] = collision_section(*s);
    return out;
  }

  json remove_attachment(const std::string& id, const std::string& attachment) {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    s->scene.detach(attachment);
    ++s->revision;
    json out = session_json(*s);
    out["collision"] = collision_section(*s);
    return out;
  }

  /// Installs a patient from an uploaded mesh ("mesh" part, .stl or .obj), a slice stack
  /// (meta.json plus slice_<i>.raw parts) or a catalogue phantom (`params["phantom"]`).
  json set_patient(const std::string& id, const std::vector<UploadedFile>& files,
                   const std::map<std::string, std::string>& params) {
    std::size_t total = 0;
    for (const auto& f : files) total += f.content.size();
    if (total > config_.max_upload_bytes) throw InvalidArgument("upload exceeds the configured size limit");
    auto s = session(id);

    collision::CollisionMeshPtr mesh;
    json info = json::object();
    std::string source;
    if (const auto it = params.find("phantom"); it != params.end()) {
      mesh = catalog().phantom_mesh(it->second);
      source = "phantom:" + it->second;
    } else {
      const UploadedFile* mesh_file = nullptr;
      const UploadedFile* meta = nullptr;
      std::map<int, std::string> slices;
      for (const auto& f : files) {
        const std::string name = f.filename.empty() ? f.field : std::filesystem::path(f.filename).filename().string();
        const auto ext = std::filesystem::path(name).extension().string();
        if (name == "meta.json" || f.field == "meta") {
          meta = &f;
        } else if (const int index = ct::slice_index_from_name(name); index >= 0) {
          if (!slices.emplace(index, f.content).second)
            throw ParseError("duplicate slice index " + std::to_string(index));
        } else if (ext == ".stl" || ext == ".STL" || ext == ".obj" || ext == ".OBJ") {
          if (mesh_file) throw InvalidArgument("upload contains more than one mesh file");
          mesh_file = &f;
        } else {
          throw InvalidArgument("unrecognised upload part '" + name + "'");
        }
      }
      if (mesh_file && (meta || !slices.empty()))
        throw InvalidArgument("upload either a mesh file or a slice stack, not both");
      if (mesh_file) {
        const auto ext = std::filesystem::path(mesh_file->filename).extension().string();
        auto m = (ext == ".obj" || ext == ".OBJ") ? geom::read_obj(mesh_file->content, "patient")
                                                  : geom::read_stl(mesh_file->content, "patient");
        if (m.empty()) throw InvalidArgument("uploaded mesh has no triangles");
        mesh = collision::make_collision_mesh(std::move(m));
        source = "mesh:" + mesh_file->filename;
      } else if (meta) {
        const auto grid = ct::parse_slice_stack(meta->content, slices, "upload");
        ct::ReconstructOptions opt;
        opt.iso = params.count("iso") ? parse_number(params.at("iso"), "iso") : config_.default_iso;
        const double target = params.count("decimate") ? parse_number(params.at("decimate"), "decimate")
                                                       : static_cast<double>(config_.default_patient_triangles);
        if (target < 0 || target != std::floor(target)) throw InvalidArgument("'decimate' must be a whole number");
        if (target > 0) opt.target_triangles = static_cast<std::size_t>(target);
        const auto iso = ct::reconstruct(grid, opt);
        if (iso.status != ct::IsoStatus::Ok) throw InvalidArgument(iso.warning);
        info["iso"] = iso.iso;
        info["decimation_ratio"] = iso.decimation_ratio;
        mesh = collision::make_collision_mesh(iso.mesh.renamed("patient"));
        source = "ct";
      } else {
        throw InvalidArgument("no patient mesh, slice stack or phantom in the request");
      }
    }

    std::lock_guard lock(s->mutex);
    s->scene.set_patient(mesh);
    s->patient_mesh_id = "patient-" + std::to_string(++s->patient_uploads);
    s->patient_source = source;
    ++s->revision;
    json out = session_json(*s);
    out["mesh_id"] = s->patient_mesh_id;
    out["triangle_count"] = mesh->mesh().triangle_count();
    out.update(info);
    out["collision"] = collision_section(*s);
    return out;
  }

  json clear_patient(const std::string& id) {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    if (!s->scene.patient()) throw NotFound("session has no patient");
    s->scene.clear_patient();
    s->patient_mesh_id.clear();
    s->patient_source.clear();
    ++s->revision;
    json out = session_json(*s);
    out["collision"] = collision_section(*s);
    return out;
  }

  /// Binary STL of the session's patient in its own frame.
  std::string patient_mesh(const std::string& id) const {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    if (!s->scene.patient()) throw NotFound("session has no patient");
    return geom::write_stl(s->scene.patient()->mesh->mesh());
  }

  json collision(const std::string& id) const {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    return {{"session", s->id}, {"revision", s->revision}, {"collision", collision_section(*s)}};
  }

  /// Stores the session's probes (replaces the set).
  json put_probes(const std::string& id, const json& body) {
    if (!body.is_object() || !body.contains("probes") || !body.at("probes").is_array())
      throw ParseError("body must be {\"probes\": [...]}");
    std::vector<measure::MeasurementProbe> probes;
    for (const auto& p : body.at("probes")) {
      probes.push_back(measure::probe_from_json(p));
      if (probes.back().id.empty()) probes.back().id = "probe" + std::to_string(probes.size());
    }
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    s->probes = std::move(probes);
    ++s->revision;
    json out = session_json(*s);
    out["readings"] = readings(*s, s->probes);
    return out;
  }

  /// Reads an ad-hoc probe (JSON in `probe`, or `a`/`b` as "x,y,z" with optional
  /// `a_anchor`/`b_anchor`); without one, reads the stored probes.
  json measure(const std::string& id, const std::map<std::string, std::string>& params) const {
    auto s = session(id);
    std::vector<measure::MeasurementProbe> adhoc;
    if (const auto it = params.find("probe"); it != params.end()) {
      json j;
      try {
        j = json::parse(it->second);
      } catch (const json::parse_error& e) {
        throw ParseError(std::string("probe: ") + e.what());
      }
      adhoc.push_back(measure::probe_from_json(j));
    } else if (params.count("a") || params.count("b")) {
      if (!params.count("a") || !params.count("b")) throw ParseError("both 'a' and 'b' are required");
      measure::MeasurementProbe p;
      p.id = params.count("id") ? params.at("id") : "probe";
      p.a.point_mm = parse_point(params.at("a"));
      p.b.point_mm = parse_point(params.at("b"));
      if (params.count("a_anchor")) p.a.anchor = params.at("a_anchor");
      if (params.count("b_anchor")) p.b.anchor = params.at("b_anchor");
      adhoc.push_back(p);
    }
    std::lock_guard lock(s->mutex);
    json out{{"session", s->id}, {"revision", s->revision}};
    out["readings"] = readings(*s, adhoc.empty() ? s->probes : adhoc);
    return out;
  }

  // ---------------------------------------------------------------- scenarios

  measure::Scenario session_scenario(const std::string& id, const std::string& name) const {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    return scenario_of(*s, name);
  }

  /// Writes the session as a frozen scenario file in the scenario directory.
  json save_scenario(const std::string& id, const json& body) {
    if (!body.is_object()) throw ParseError("request body must be a JSON object");
    const std::string name = body.value("name", std::string{});
    static const std::regex valid("[A-Za-z0-9_-]{1,64}");
    if (!std::regex_match(name, valid)) throw InvalidArgument("scenario name must match [A-Za-z0-9_-]{1,64}");
    const bool overwrite = body.value("overwrite", false);
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    std::filesystem::create_directories(config_.scenario_dir);
    const auto file = config_.scenario_dir / (name + ".json");
    if (std::filesystem::exists(file) && !overwrite) throw Conflict("scenario '" + name + "' already exists");
    auto scenario = scenario_of(*s, name);
    if (s->scene.patient() && scenario.patient && !scenario.patient->mesh.empty())
      // OBJ keeps full precision, so the replay sees the exact same geometry.
      geom::save_mesh(s->scene.patient()->mesh->mesh(), config_.scenario_dir / scenario.patient->mesh);
    const auto result = measure::run_scenario(scenario, catalog(), config_.scenario_dir);
    measure::save_scenario(measure::freeze(scenario, result), file);
    return {{"session", s->id}, {"revision", s->revision}, {"file", file.filename().string()},
            {"result", measure::to_json(result)}};
  }

  json list_scenarios() const {
    json out = json::array();
    if (std::filesystem::is_directory(config_.scenario_dir)) {
      std::vector<std::string> names;
      for (const auto& e : std::filesystem::directory_iterator(config_.scenario_dir))
        if (e.is_regular_file() && e.path().extension() == ".json") names.push_back(e.path().filename().string());
      std::sort(names.begin(), names.end());
      for (const auto& n : names) out.push_back(n);
    }
    return {{"scenarios", out}};
  }

  json run_scenario(const std::string& file) const {
    const auto path = scenario_path(file);
    const auto result = measure::run_scenario(measure::load_scenario(path), catalog(), path.parent_path());
    return measure::to_json(result);
  }

 private:
  struct Session {
    explicit Session(linac::MachinePtr m) : scene(std::move(m)) {}
    std::mutex mutex;
    std::string id;
    linac::Scene scene;
    std::uint64_t revision = 1;
    std::vector<measure::MeasurementProbe> probes;
    std::string patient_mesh_id;
    std::string patient_source;
    std::uint64_t patient_uploads = 0;
    // Collision section for `cached_revision`; requests between mutations reuse it.
    mutable std::optional<json> cached_collision;
    mutable std::uint64_t cached_revision = 0;
  };

  std::shared_ptr<Session> session(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
    return it->second;
  }

  std::string new_id() {
    const auto n = counter_.fetch_add(1) + 1;
    std::uniform_int_distribution<std::uint32_t> d;
    std::ostringstream ss;
    ss << std::hex << d(rng_) << n;
    return ss.str();
  }

  static double parse_number(const std::string& s, const char* what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v))
      throw ParseError(std::string("'") + what + "' must be a number");
    return v;
  }

  static Vec3 parse_point(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) v.push_back(parse_number(part, "point"));
    if (v.size() != 3) throw ParseError("point must be 'x,y,z'");
    return {v[0], v[1], v[2]};
  }

  /// Session summary. `placements` gives each component's world matrix so a viewer can pose
  /// the meshes it fetched once.
  static json session_json(const Session& s) {
    json atts = json::array();
    for (const auto& a : s.scene.attachments()) atts.push_back(a.id);
    json placements = json::object();
    for (const auto& p : s.scene.placed()) placements[p.id] = linac::transform_to_json(p.world)["matrix"];
    json out{{"session", s.id},
             {"revision", s.revision},
             {"machine", s.scene.machine().id()},
             {"state", linac::state_to_json(s.scene.state())},
             {"attachments", atts},
             {"placements", placements},
             {"patient", nullptr}};
    if (s.scene.patient())
      out["patient"] = {{"mesh_id", s.patient_mesh_id},
                        {"source", s.patient_source},
                        {"triangle_count", s.scene.patient()->mesh->mesh().triangle_count()}};
    return out;
  }

  static json collision_section(const Session& s) {
    if (s.cached_collision && s.cached_revision == s.revision) return *s.cached_collision;
    const auto placed = s.scene.placed();
    const auto reports = collision::scene_collision(placed);
    const auto beam = collision::beam_couch_intersection(s.scene.beam(), placed);
    json out{{"colliding", collision::any_colliding(reports)},
             {"highlighted", collision::highlighted_ids(reports)},
             {"reports", collision::to_json(reports)},
             {"beam_couch", {{"intersects", collision::any_colliding(beam)}, {"reports", collision::to_json(beam)}}}};
    s.cached_collision = out;
    s.cached_revision = s.revision;
    return out;
  }

  static json readings(const Session& s, const std::vector<measure::MeasurementProbe>& probes) {
    const auto placed = s.scene.placed();
    json out = json::array();
    for (const auto& p : probes) out.push_back(measure::to_json(measure::read_probe(p, placed)));
    return out;
  }

  measure::Scenario scenario_of(const Session& s, const std::string& name) const {
    measure::Scenario sc;
    sc.name = name;
    sc.machine = s.scene.machine().id();
    sc.state = s.scene.state();
    for (const auto& a : s.scene.attachments()) sc.attachments.push_back(a.id);
    if (s.scene.patient()) {
      measure::PatientRef ref;
      if (s.patient_source.starts_with("phantom:"))
        ref.phantom = s.patient_source.substr(8);
      else
        ref.mesh = name + "_patient.obj";
      ref.offset = s.scene.patient()->offset;
      sc.patient = ref;
    }
    sc.beam_couch = true;
    sc.probes = s.probes;
    return sc;
  }

  std::filesystem::path scenario_path(const std::string& file) const {
    static const std::regex valid("[A-Za-z0-9_-]{1,64}(\\.json)?");
    if (!std::regex_match(file, valid)) throw InvalidArgument("invalid scenario file name '" + file + "'");
    auto p = config_.scenario_dir / file;
    if (p.extension() != ".json") p += ".json";
    if (!std::filesystem::exists(p)) throw NotFound("scenario '" + file + "' not found");
    return p;
  }

  ServiceConfig config_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::atomic<std::uint64_t> counter_{0};
  std::mt19937 rng_{std::random_device{}()};
};

}  // namespace ebrt::service
