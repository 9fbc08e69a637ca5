#pragma once

#include <cmath>
#include <span>

#include <json.hpp>

#include "ebrt/collision/scene.hpp"

namespace ebrt::collision {

/// Infinite distances (boolean-only queries without contact) are written as null.
inline nlohmann::json to_json(const CollisionReport& r) {
  auto vec = [](const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); };
  nlohmann::json j{{"source", r.source},
                   {"target", r.target},
                   {"mode", to_string(r.mode)},
                   {"colliding", r.colliding},
                   {"distance_mm", nullptr},
                   {"witness_source_mm", vec(r.witness_source)},
                   {"witness_target_mm", vec(r.witness_target)},
                   {"highlighted", r.highlighted}};
  if (std::isfinite(r.distance_mm)) j["distance_mm"] = r.distance_mm;
  return j;
}

inline nlohmann::json to_json(std::span<const CollisionReport> reports) {
  auto j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back(to_json(r));
  return j;
}

}  // namespace ebrt::collision
