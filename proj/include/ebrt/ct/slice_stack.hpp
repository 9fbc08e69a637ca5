#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebrt/core/error.hpp"
#include "ebrt/geometry/mesh_io.hpp"
#include "ebrt/geometry/vec3.hpp"

// CT slice-stack directory:
//   meta.json        rows, cols, pixel_size_mm, slice_spacing_mm, slices, slope, intercept, origin_mm
//   slice_<i>.raw    rows * cols unsigned 16-bit little-endian integers, row-major, i = 0..slices-1
// Stored integers map to scalars as value * slope + intercept.

namespace ebrt::ct {

using geom::Vec3;
using json = nlohmann::json;

struct SliceStackMeta {
  int rows = 0;
  int cols = 0;
  double pixel_size_mm = 1.0;
  double slice_spacing_mm = 1.0;
  int slices = 0;
  double slope = 1.0;
  double intercept = 0.0;
  Vec3 origin_mm;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * static_cast<std::size_t>(slices);
  }
  std::size_t slice_bytes() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 2; }

  void validate() const {
    if (rows <= 0 || cols <= 0) throw ParseError("slice stack: rows and cols must be positive");
    if (slices < 2) throw ParseError("slice stack: at least two slices are required");
    if (!(pixel_size_mm > 0.0) || !std::isfinite(pixel_size_mm)) throw ParseError("slice stack: pixel_size_mm must be positive");
    if (!(slice_spacing_mm > 0.0) || !std::isfinite(slice_spacing_mm))
      throw ParseError("slice stack: slice_spacing_mm must be positive");
    if (!(slope > 0.0) || !std::isfinite(slope) || !std::isfinite(intercept))
      throw ParseError("slice stack: slope must be positive and intercept finite");
    if (!geom::is_finite(origin_mm)) throw ParseError("slice stack: origin_mm must be finite");
  }
};

inline SliceStackMeta meta_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("meta.json must be a JSON object");
  SliceStackMeta m;
  try {
    auto integer = [&](const char* key) {
      const auto& v = j.at(key);
      if (!v.is_number_integer()) throw ParseError(std::string("meta.json: '") + key + "' must be an integer");
      return v.get<int>();
    };
    auto number = [&](const char* key) {
      const auto& v = j.at(key);
      if (!v.is_number()) throw ParseError(std::string("meta.json: '") + key + "' must be a number");
      return v.get<double>();
    };
    m.rows = integer("rows");
    m.cols = integer("cols");
    m.slices = integer("slices");
    m.pixel_size_mm = number("pixel_size_mm");
    m.slice_spacing_mm = number("slice_spacing_mm");
    if (j.contains("slope")) m.slope = number("slope");
    if (j.contains("intercept")) m.intercept = number("intercept");
    if (j.contains("origin_mm")) {
      const auto& o = j.at("origin_mm");
      if (!o.is_array() || o.size() != 3) throw ParseError("meta.json: origin_mm must be [x, y, z]");
      m.origin_mm = {o[0].get<double>(), o[1].get<double>(), o[2].get<double>()};
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("meta.json: ") + e.what());
  }
  m.validate();
  return m;
}

inline json meta_to_json(const SliceStackMeta& m) {
  return {{"rows", m.rows},
          {"cols", m.cols},
          {"pixel_size_mm", m.pixel_size_mm},
          {"slice_spacing_mm", m.slice_spacing_mm},
          {"slices", m.slices},
          {"slope", m.slope},
          {"intercept", m.intercept},
          {"origin_mm", {m.origin_mm.x, m.origin_mm.y, m.origin_mm.z}}};
}

/// Dense scalar field, x (column) fastest, then y (row), then z (slice).
class VolumeGrid {
 public:
  VolumeGrid(SliceStackMeta meta, std::vector<float> scalars, std::string id = {})
      : meta_(meta), scalars_(std::move(scalars)), id_(std::move(id)) {
    meta_.validate();
    if (scalars_.size() != meta_.voxel_count())
      throw InvalidArgument("volume: scalar count does not match rows * cols * slices");
    for (float v : scalars_)
      if (!std::isfinite(v)) throw InvalidArgument("volume: non-finite scalar");
  }

  const SliceStackMeta& meta() const { return meta_; }
  const std::vector<float>& scalars() const { return scalars_; }
  const std::string& id() const { return id_; }
  int nx() const { return meta_.cols; }
  int ny() const { return meta_.rows; }
  int nz() const { return meta_.slices; }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * meta_.rows + static_cast<std::size_t>(y)) * meta_.cols +
           static_cast<std::size_t>(x);
  }
  float at(int x, int y, int z) const { return scalars_[index(x, y, z)]; }

  /// World position (mm) of a fractional grid coordinate.
  Vec3 position(double x, double y, double z) const {
    return {meta_.origin_mm.x + x * meta_.pixel_size_mm, meta_.origin_mm.y + y * meta_.pixel_size_mm,
            meta_.origin_mm.z + z * meta_.slice_spacing_mm};
  }

  std::pair<float, float> value_range() const {
    const auto [lo, hi] = std::minmax_element(scalars_.begin(), scalars_.end());
    return {*lo, *hi};
  }

 private:
  SliceStackMeta meta_;
  std::vector<float> scalars_;
  std::string id_;
};

/// Builds a grid from meta.json text and the raw slice payloads keyed by slice index.
inline VolumeGrid parse_slice_stack(const std::string& meta_text, const std::map<int, std::string>& slices,
                                    std::string id = {}) {
  json j;
  try {
    j = json::parse(meta_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("meta.json: ") + e.what());
  }
  const SliceStackMeta meta = meta_from_json(j);
  // Indices must run 0, 1, ..., slices-1 with no gaps or repeats.
  int expected = 0;
  for (const auto& [index, bytes] : slices) {
    if (index != expected)
      throw ParseError("slice indices are not contiguous from 0: expected slice_" + std::to_string(expected) +
                       ", found slice_" + std::to_string(index));
    ++expected;
  }
  if (expected != meta.slices)
    throw ParseError("meta.json declares " + std::to_string(meta.slices) + " slices but " +
                     std::to_string(expected) + " were provided");
  std::vector<float> scalars;
  scalars.reserve(meta.voxel_count());
  for (const auto& [index, bytes] : slices) {
    if (bytes.size() != meta.slice_bytes())
      throw ParseError("slice_" + std::to_string(index) + ": expected " + std::to_string(meta.slice_bytes()) +
                       " bytes, found " + std::to_string(bytes.size()));
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t k = 0; k < bytes.size(); k += 2) {
      const auto stored = static_cast<std::uint16_t>(p[k] | (p[k + 1] << 8));
      scalars.push_back(static_cast<float>(stored * meta.slope + meta.intercept));
    }
  }
  return VolumeGrid(meta, std::move(scalars), std::move(id));
}

/// Parses "slice_<n>.raw" into n; returns -1 for anything else.
inline int slice_index_from_name(const std::string& name) {
  constexpr std::string_view prefix = "slice_";
  constexpr std::string_view suffix = ".raw";
  if (name.size() <= prefix.size() + suffix.size() || !name.starts_with(prefix) || !name.ends_with(suffix))
    return -1;
  const std::string_view digits(name.data() + prefix.size(), name.size() - prefix.size() - suffix.size());
  int n = -1;
  const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc{} || end != digits.data() + digits.size() || n < 0) return -1;
  return n;
}

inline VolumeGrid load_slice_stack(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.json";
  if (!std::filesystem::exists(meta_path)) throw ParseError("slice stack: missing " + meta_path.string());
  std::map<int, std::string> slices;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const int index = slice_index_from_name(e.path().filename().string());
    if (index < 0) continue;
    if (!slices.emplace(index, geom::read_file_bytes(e.path())).second)
      throw ParseError("slice stack: duplicate slice index " + std::to_string(index));
  }
  return parse_slice_stack(geom::read_file_bytes(meta_path), slices, dir.filename().string());
}

/// Writes stored integer slices and their metadata.
inline void write_slice_stack(const std::filesystem::path& dir, const SliceStackMeta& meta,
                              const std::vector<std::uint16_t>& stored) {
  meta.validate();
  if (stored.size() != meta.voxel_count()) throw InvalidArgument("write_slice_stack: wrong voxel count");
  std::filesystem::create_directories(dir);
  geom::write_file_bytes(dir / "meta.json", meta_to_json(meta).dump(2) + "\n");
  const std::size_t per_slice = static_cast<std::size_t>(meta.rows) * meta.cols;
  for (int s = 0; s < meta.slices; ++s) {
    std::string bytes(per_slice * 2, '\0');
    for (std::size_t k = 0; k < per_slice; ++k) {
      const std::uint16_t v = stored[s * per_slice + k];
      bytes[2 * k] = static_cast<char>(v & 0xff);
      bytes[2 * k + 1] = static_cast<char>(v >> 8);
    }
    geom::write_file_bytes(dir / ("slice_" + std::to_string(s) + ".raw"), bytes);
  }
}

/// Smooth-edged sphere phantom in Hounsfield-like units: -1000 outside, 0 inside, with a
/// linear ramp of width `edge_mm` centred on `radius_mm`. Returns stored integers for slope 1
/// and intercept -1000.
inline std::vector<std::uint16_t> sphere_phantom(const SliceStackMeta& meta, const Vec3& center_mm, double radius_mm,
                                                 double edge_mm) {
  std::vector<std::uint16_t> out(meta.voxel_count());
  std::size_t i = 0;
  for (int z = 0; z < meta.slices; ++z)
    for (int y = 0; y < meta.rows; ++y)
      for (int x = 0; x < meta.cols; ++x) {
        const Vec3 p{meta.origin_mm.x + x * meta.pixel_size_mm, meta.origin_mm.y + y * meta.pixel_size_mm,
                     meta.origin_mm.z + z * meta.slice_spacing_mm};
        const double r = geom::distance(p, center_mm);
        const double inside = std::clamp((radius_mm + edge_mm / 2 - r) / edge_mm, 0.0, 1.0);
        out[i++] = static_cast<std::uint16_t>(std::lround(1000.0 * inside));
      }
  return out;
}

}  // namespace ebrt::ct
