#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ebrt/collision/collision_mesh.hpp"
#include "ebrt/collision/scene.hpp"
#include "ebrt/core/error.hpp"

namespace ebrt::measure {

using collision::PlacedComponent;
using geom::Vec3;
using json = nlohmann::json;

/// A probe endpoint: a free world point, or a point fixed in a component's local frame so it
/// follows that component as the machine moves.
struct ProbePoint {
  Vec3 point_mm;
  std::optional<std::string> anchor;

  bool operator==(const ProbePoint&) const = default;
};

/// Two endpoints joined by a measuring line.
struct MeasurementProbe {
  std::string id;
  ProbePoint a;
  ProbePoint b;

  bool operator==(const MeasurementProbe&) const = default;
};

struct ProbeReading {
  std::string id;
  Vec3 a_world;
  Vec3 b_world;
  double distance_mm = 0.0;
};

inline Vec3 resolve(const ProbePoint& p, std::span<const PlacedComponent> placed) {
  if (!geom::is_finite(p.point_mm)) throw InvalidArgument("probe point is not finite");
  if (!p.anchor) return p.point_mm;
  const PlacedComponent* hit = nullptr;
  for (const auto& c : placed)
    if (c.id == *p.anchor) {
      if (hit) throw InvalidArgument("probe anchor '" + *p.anchor + "' matches more than one component");
      hit = &c;
    }
  if (!hit) throw NotFound("probe anchor '" + *p.anchor + "' is not in the scene");
  return hit->world.apply(p.point_mm);
}

inline ProbeReading read_probe(const MeasurementProbe& probe, std::span<const PlacedComponent> placed = {}) {
  ProbeReading r;
  r.id = probe.id;
  r.a_world = resolve(probe.a, placed);
  r.b_world = resolve(probe.b, placed);
  r.distance_mm = geom::distance(r.a_world, r.b_world);
  return r;
}

/// Euclidean length of the probe in millimetres.
inline double measure(const MeasurementProbe& probe, std::span<const PlacedComponent> placed = {}) {
  return read_probe(probe, placed).distance_mm;
}

/// Agreement between reference (physical) and simulated distances, in centimetres.
struct AccuracyStats {
  std::vector<double> differences_cm;
  double mean_cm = 0.0;
  /// Sample standard deviation (n - 1 denominator); 0 for a single pair.
  double sd_cm = 0.0;
  std::size_t count = 0;
};

inline AccuracyStats stats_from_differences(std::vector<double> d) {
  if (d.empty()) throw InvalidArgument("accuracy statistics need at least one pair");
  for (double x : d)
    if (!std::isfinite(x) || x < 0.0) throw InvalidArgument("differences must be finite and non-negative");
  AccuracyStats s;
  s.count = d.size();
  s.mean_cm = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(s.count);
  if (s.count > 1) {
    double ss = 0.0;
    for (double x : d) ss += (x - s.mean_cm) * (x - s.mean_cm);
    s.sd_cm = std::sqrt(ss / static_cast<double>(s.count - 1));
  }
  s.differences_cm = std::move(d);
  return s;
}

/// Pairs are (reference cm, simulated cm).
inline AccuracyStats accuracy_stats(std::span<const std::pair<double, double>> pairs) {
  std::vector<double> d;
  d.reserve(pairs.size());
  for (const auto& [reference, simulated] : pairs) d.push_back(std::abs(reference - simulated));
  return stats_from_differences(std::move(d));
}

// JSON: {"point_mm": [x, y, z], "anchor": "couch"}; the anchor is optional.

inline json to_json(const ProbePoint& p) {
  json j{{"point_mm", {p.point_mm.x, p.point_mm.y, p.point_mm.z}}};
  if (p.anchor) j["anchor"] = *p.anchor;
  return j;
}

inline ProbePoint probe_point_from_json(const json& j) {
  if (!j.is_object() || !j.contains("point_mm")) throw ParseError("probe point needs 'point_mm'");
  const auto& v = j.at("point_mm");
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number())
    throw ParseError("probe 'point_mm' must be [x, y, z]");
  ProbePoint p{{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()}, {}};
  if (j.contains("anchor") && !j.at("anchor").is_null()) {
    if (!j.at("anchor").is_string()) throw ParseError("probe 'anchor' must be a component id");
    p.anchor = j.at("anchor").get<std::string>();
  }
  for (const auto& [key, _] : j.items())
    if (key != "point_mm" && key != "anchor") throw ParseError("unknown probe point field '" + key + "'");
  return p;
}

inline json to_json(const MeasurementProbe& p) { return {{"id", p.id}, {"a", to_json(p.a)}, {"b", to_json(p.b)}}; }

inline MeasurementProbe probe_from_json(const json& j) {
  if (!j.is_object() || !j.contains("a") || !j.contains("b")) throw ParseError("probe needs endpoints 'a' and 'b'");
  MeasurementProbe p;
  if (j.contains("id")) {
    if (!j.at("id").is_string()) throw ParseError("probe 'id' must be a string");
    p.id = j.at("id").get<std::string>();
  }
  p.a = probe_point_from_json(j.at("a"));
  p.b = probe_point_from_json(j.at("b"));
  return p;
}

inline json to_json(const ProbeReading& r) {
  return {{"id", r.id},
          {"a_world_mm", {r.a_world.x, r.a_world.y, r.a_world.z}},
          {"b_world_mm", {r.b_world.x, r.b_world.y, r.b_world.z}},
          {"distance_mm", r.distance_mm}};
}

inline json to_json(const AccuracyStats& s) {
  return {{"differences_cm", s.differences_cm}, {"mean_cm", s.mean_cm}, {"sd_cm", s.sd_cm}, {"count", s.count}};
}

}  // namespace ebrt::measure
