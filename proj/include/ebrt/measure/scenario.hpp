#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebrt/collision/report_json.hpp"
#include "ebrt/collision/scene.hpp"
#include "ebrt/geometry/mesh_io.hpp"
#include "ebrt/linac/builtin.hpp"
#include "ebrt/linac/kinematics.hpp"
#include "ebrt/measure/measurement.hpp"

// Scenario file (JSON):
//   {"schema": "ebrt-scenario/1", "name": ..., "description": ..., "machine": "<id>",
//    "state": {partial machine state}, "attachments": ["<id>", ...],
//    "patient": {"phantom": "<id>"} | {"mesh": "<path relative to the file>"}, optional "offset",
//    "beam_couch": bool, "probes": [...], "expected": {"pairs": [...], "beam_couch": [...], "probes": [...]}}

namespace ebrt::measure {

using collision::CollisionReport;
using linac::Catalog;
using linac::MachineState;

inline constexpr const char* kScenarioSchema = "ebrt-scenario/1";
inline constexpr double kDistanceTolerance = 1e-6;

struct PatientRef {
  std::string phantom;  // catalogue phantom id, or
  std::string mesh;     // STL/OBJ path, relative to the scenario file
  std::optional<geom::Transform> offset;
};

struct ExpectedPair {
  std::string source;
  std::string target;
  bool colliding = false;
  double distance_mm = 0.0;
};

struct ExpectedProbe {
  std::string id;
  double distance_mm = 0.0;
};

struct Expected {
  std::vector<ExpectedPair> pairs;
  std::vector<ExpectedPair> beam_couch;
  std::vector<ExpectedProbe> probes;
};

struct Scenario {
  std::string name;
  std::string description;
  std::string machine;
  MachineState state;
  std::vector<std::string> attachments;
  std::optional<PatientRef> patient;
  bool beam_couch = false;
  std::vector<MeasurementProbe> probes;
  std::optional<Expected> expected;
};

struct Deviation {
  std::string what;  // "pair source/target", "beam source/target", "probe id"
  std::string message;
  double delta_mm = 0.0;
};

struct ScenarioResult {
  std::string name;
  MachineState state;  // as clamped
  std::vector<CollisionReport> reports;
  std::vector<CollisionReport> beam_couch;
  std::vector<ProbeReading> readings;
  std::vector<Deviation> deviations;
  bool checked = false;  // the scenario carried expected values

  bool colliding() const { return collision::any_colliding(reports); }
  bool passed() const { return deviations.empty(); }
  double max_deviation_mm() const {
    double m = 0.0;
    for (const auto& d : deviations) m = std::max(m, d.delta_mm);
    return m;
  }
};

/// Builds the scene a scenario describes. Patient mesh paths resolve against `base_dir`.
inline linac::Scene build_scene(const Scenario& s, const Catalog& catalog,
                                const std::filesystem::path& base_dir = {}) {
  linac::Scene scene(catalog.machine(s.machine));
  scene.set_state(s.state);
  for (const auto& id : s.attachments) scene.attach(id);
  if (s.patient) {
    collision::CollisionMeshPtr mesh;
    if (!s.patient->phantom.empty()) {
      mesh = catalog.phantom_mesh(s.patient->phantom);
    } else if (!s.patient->mesh.empty()) {
      const auto p = std::filesystem::path(s.patient->mesh);
      mesh = collision::make_collision_mesh(geom::load_mesh(p.is_absolute() ? p : base_dir / p));
    } else {
      throw InvalidArgument("scenario patient names neither a phantom nor a mesh");
    }
    scene.set_patient(std::move(mesh), s.patient->offset);
  }
  return scene;
}

namespace detail {

inline std::string pair_label(const std::string& kind, const std::string& a, const std::string& b) {
  return kind + " " + a + "/" + b;
}

inline void compare_pairs(const std::string& kind, const std::vector<ExpectedPair>& expected,
                          const std::vector<CollisionReport>& actual, double tol, std::vector<Deviation>& out) {
  for (const auto& e : expected) {
    const auto it = std::find_if(actual.begin(), actual.end(),
                                 [&](const auto& r) { return r.source == e.source && r.target == e.target; });
    const auto label = pair_label(kind, e.source, e.target);
    if (it == actual.end()) {
      out.push_back({label, "expected pair was not evaluated", std::numeric_limits<double>::infinity()});
      continue;
    }
    if (it->colliding != e.colliding)
      out.push_back({label, std::string("colliding is ") + (it->colliding ? "true" : "false") + ", expected " +
                                (e.colliding ? "true" : "false"),
                     std::numeric_limits<double>::infinity()});
    const double delta = std::abs(it->distance_mm - e.distance_mm);
    if (!(delta <= tol))
      out.push_back({label, "distance " + std::to_string(it->distance_mm) + " mm, expected " +
                                std::to_string(e.distance_mm) + " mm",
                     delta});
  }
  for (const auto& r : actual) {
    const bool listed = std::any_of(expected.begin(), expected.end(),
                                    [&](const auto& e) { return r.source == e.source && r.target == e.target; });
    if (!listed)
      out.push_back({pair_label(kind, r.source, r.target), "pair has no expected value",
                     std::numeric_limits<double>::infinity()});
  }
}

}  // namespace detail

/// Forward kinematics, collision checks and probe readings, compared with the expected block
/// when the scenario has one.
inline ScenarioResult run_scenario(const Scenario& s, const Catalog& catalog,
                                   const std::filesystem::path& base_dir = {}, double tol_mm = kDistanceTolerance) {
  const auto scene = build_scene(s, catalog, base_dir);
  const auto placed = scene.placed();
  ScenarioResult r;
  r.name = s.name;
  r.state = scene.state();
  r.reports = collision::scene_collision(placed);
  if (s.beam_couch) r.beam_couch = collision::beam_couch_intersection(scene.beam(), placed);
  for (const auto& p : s.probes) r.readings.push_back(read_probe(p, placed));
  if (s.expected) {
    r.checked = true;
    detail::compare_pairs("pair", s.expected->pairs, r.reports, tol_mm, r.deviations);
    detail::compare_pairs("beam", s.expected->beam_couch, r.beam_couch, tol_mm, r.deviations);
    for (const auto& e : s.expected->probes) {
      const auto it = std::find_if(r.readings.begin(), r.readings.end(), [&](const auto& x) { return x.id == e.id; });
      if (it == r.readings.end()) {
        r.deviations.push_back({"probe " + e.id, "no probe with this id", std::numeric_limits<double>::infinity()});
        continue;
      }
      const double delta = std::abs(it->distance_mm - e.distance_mm);
      if (!(delta <= tol_mm))
        r.deviations.push_back({"probe " + e.id, "reading " + std::to_string(it->distance_mm) + " mm, expected " +
                                                     std::to_string(e.distance_mm) + " mm",
                                delta});
    }
  }
  return r;
}

/// Copy of `s` whose expected block records `r`.
inline Scenario freeze(Scenario s, const ScenarioResult& r) {
  Expected e;
  for (const auto& x : r.reports) e.pairs.push_back({x.source, x.target, x.colliding, x.distance_mm});
  for (const auto& x : r.beam_couch) e.beam_couch.push_back({x.source, x.target, x.colliding, x.distance_mm});
  for (const auto& x : r.readings) e.probes.push_back({x.id, x.distance_mm});
  s.expected = std::move(e);
  return s;
}

// ------------------------------------------------------------------ JSON

namespace detail {

inline json to_json(const ExpectedPair& p) {
  return {{"source", p.source}, {"target", p.target}, {"colliding", p.colliding}, {"distance_mm", p.distance_mm}};
}

inline ExpectedPair expected_pair_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("expected pair must be an object");
  ExpectedPair p;
  p.source = linac::detail::string_field(j, "source");
  p.target = linac::detail::string_field(j, "target");
  if (!j.contains("colliding") || !j.at("colliding").is_boolean())
    throw ParseError("expected pair needs boolean 'colliding'");
  p.colliding = j.at("colliding").get<bool>();
  p.distance_mm = linac::detail::number(j, "distance_mm");
  return p;
}

inline std::vector<ExpectedPair> expected_pairs(const json& j, const char* key) {
  std::vector<ExpectedPair> out;
  if (!j.contains(key)) return out;
  if (!j.at(key).is_array()) throw ParseError(std::string("expected '") + key + "' must be an array");
  for (const auto& e : j.at(key)) out.push_back(expected_pair_from_json(e));
  return out;
}

}  // namespace detail

inline json to_json(const Scenario& s) {
  json j{{"schema", kScenarioSchema}, {"name", s.name}};
  if (!s.description.empty()) j["description"] = s.description;
  j["machine"] = s.machine;
  j["state"] = linac::state_to_json(s.state);
  j["attachments"] = s.attachments;
  if (s.patient) {
    json p = json::object();
    if (!s.patient->phantom.empty()) p["phantom"] = s.patient->phantom;
    if (!s.patient->mesh.empty()) p["mesh"] = s.patient->mesh;
    if (s.patient->offset) p["offset"] = linac::transform_to_json(*s.patient->offset);
    j["patient"] = p;
  }
  if (s.beam_couch) j["beam_couch"] = true;
  if (!s.probes.empty()) {
    j["probes"] = json::array();
    for (const auto& p : s.probes) j["probes"].push_back(to_json(p));
  }
  if (s.expected) {
    json e{{"pairs", json::array()}};
    for (const auto& p : s.expected->pairs) e["pairs"].push_back(detail::to_json(p));
    if (!s.expected->beam_couch.empty()) {
      e["beam_couch"] = json::array();
      for (const auto& p : s.expected->beam_couch) e["beam_couch"].push_back(detail::to_json(p));
    }
    if (!s.expected->probes.empty()) {
      e["probes"] = json::array();
      for (const auto& p : s.expected->probes) e["probes"].push_back({{"id", p.id}, {"distance_mm", p.distance_mm}});
    }
    j["expected"] = e;
  }
  return j;
}

inline Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("scenario must be a JSON object");
  if (!j.contains("schema") || j.at("schema") != kScenarioSchema)
    throw ParseError(std::string("scenario schema must be '") + kScenarioSchema + "'");
  static const std::vector<std::string> known{"schema", "name",       "description", "machine", "state",
                                              "attachments", "patient", "beam_couch", "probes", "expected"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ParseError("unknown scenario field '" + key + "'");
  Scenario s;
  s.name = j.value("name", std::string{});
  if (j.contains("description")) s.description = linac::detail::string_field(j, "description");
  s.machine = linac::detail::string_field(j, "machine");
  if (j.contains("state")) s.state = linac::state_from_json(j.at("state"));
  if (j.contains("attachments")) {
    if (!j.at("attachments").is_array()) throw ParseError("'attachments' must be an array of ids");
    for (const auto& a : j.at("attachments")) {
      if (!a.is_string()) throw ParseError("'attachments' must be an array of ids");
      s.attachments.push_back(a.get<std::string>());
    }
  }
  if (j.contains("patient")) {
    const auto& p = j.at("patient");
    if (!p.is_object()) throw ParseError("'patient' must be an object");
    PatientRef ref;
    if (p.contains("phantom")) ref.phantom = linac::detail::string_field(p, "phantom");
    if (p.contains("mesh")) ref.mesh = linac::detail::string_field(p, "mesh");
    if (ref.phantom.empty() == ref.mesh.empty()) throw ParseError("'patient' needs exactly one of 'phantom' or 'mesh'");
    if (p.contains("offset")) ref.offset = linac::transform_from_json(p.at("offset"));
    s.patient = ref;
  }
  if (j.contains("beam_couch")) {
    if (!j.at("beam_couch").is_boolean()) throw ParseError("'beam_couch' must be true or false");
    s.beam_couch = j.at("beam_couch").get<bool>();
  }
  if (j.contains("probes")) {
    if (!j.at("probes").is_array()) throw ParseError("'probes' must be an array");
    for (const auto& p : j.at("probes")) s.probes.push_back(probe_from_json(p));
  }
  if (j.contains("expected")) {
    const auto& e = j.at("expected");
    if (!e.is_object()) throw ParseError("'expected' must be an object");
    Expected x;
    x.pairs = detail::expected_pairs(e, "pairs");
    x.beam_couch = detail::expected_pairs(e, "beam_couch");
    if (e.contains("probes")) {
      if (!e.at("probes").is_array()) throw ParseError("expected 'probes' must be an array");
      for (const auto& p : e.at("probes"))
        x.probes.push_back({linac::detail::string_field(p, "id"), linac::detail::number(p, "distance_mm")});
    }
    s.expected = std::move(x);
  }
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& p) {
  json j;
  try {
    j = json::parse(geom::read_file_bytes(p));
  } catch (const json::parse_error& e) {
    throw ParseError(p.filename().string() + ": " + e.what());
  }
  auto s = scenario_from_json(j);
  if (s.name.empty()) s.name = p.stem().string();
  return s;
}

inline void save_scenario(const Scenario& s, const std::filesystem::path& p) {
  geom::write_file_bytes(p, to_json(s).dump(2) + "\n");
}

inline json to_json(const Deviation& d) {
  json j{{"what", d.what}, {"message", d.message}, {"delta_mm", nullptr}};
  if (std::isfinite(d.delta_mm)) j["delta_mm"] = d.delta_mm;
  return j;
}

inline json to_json(const ScenarioResult& r) {
  json j{{"name", r.name},
         {"state", linac::state_to_json(r.state)},
         {"colliding", r.colliding()},
         {"highlighted", collision::highlighted_ids(r.reports)},
         {"reports", collision::to_json(r.reports)}};
  if (!r.beam_couch.empty()) {
    j["beam_couch"] = collision::to_json(r.beam_couch);
    j["beam_hits_couch"] = collision::any_colliding(r.beam_couch);
  }
  j["probes"] = json::array();
  for (const auto& p : r.readings) j["probes"].push_back(to_json(p));
  if (r.checked) {
    j["passed"] = r.passed();
    j["deviations"] = json::array();
    for (const auto& d : r.deviations) j["deviations"].push_back(to_json(d));
  }
  return j;
}

struct SuiteEntry {
  std::filesystem::path file;
  ScenarioResult result;
  std::string error;  // load or run failure
};

/// Runs every *.json scenario in `dir`, sorted by file name.
inline std::vector<SuiteEntry> run_suite(const std::filesystem::path& dir, const Catalog& catalog,
                                         double tol_mm = kDistanceTolerance) {
  if (!std::filesystem::is_directory(dir)) throw IoError("scenario directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<SuiteEntry> out;
  for (const auto& f : files) {
    SuiteEntry e{f, {}, {}};
    try {
      e.result = run_scenario(load_scenario(f), catalog, f.parent_path(), tol_mm);
      if (!e.result.checked) e.error = "scenario has no expected block";
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline bool suite_passed(const std::vector<SuiteEntry>& entries) {
  return !entries.empty() && std::all_of(entries.begin(), entries.end(), [](const auto& e) {
    return e.error.empty() && e.result.passed();
  });
}

}  // namespace ebrt::measure
