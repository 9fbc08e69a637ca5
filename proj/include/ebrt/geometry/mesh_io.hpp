#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ebrt/core/error.hpp"
#include "ebrt/geometry/tri_mesh.hpp"

// Binary STL and ASCII OBJ (vertices + triangular faces). OBJ indices are 1-based on disk.

namespace ebrt::geom {

static_assert(std::endian::native == std::endian::little, "mesh I/O assumes a little-endian host");

enum class MeshFormat { Stl, Obj };

inline MeshFormat format_from_path(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".stl") return MeshFormat::Stl;
  if (ext == ".obj") return MeshFormat::Obj;
  throw InvalidArgument("unknown mesh extension '" + ext + "' (expected .stl or .obj)");
}

inline std::string write_stl(const TriMesh& m) {
  std::string out(80, '\0');
  const std::string header = "ebrt binary stl " + m.name();
  std::memcpy(out.data(), header.data(), std::min<std::size_t>(header.size(), 80));
  const auto count = static_cast<std::uint32_t>(m.triangle_count());
  out.append(reinterpret_cast<const char*>(&count), 4);
  auto put = [&out](const Vec3& v) {
    const float f[3] = {static_cast<float>(v.x), static_cast<float>(v.y), static_cast<float>(v.z)};
    out.append(reinterpret_cast<const char*>(f), sizeof f);
  };
  for (std::size_t i = 0; i < m.triangle_count(); ++i) {
    const auto t = m.triangle(i);
    const Vec3 n = triangle_normal(t);
    const double len = norm(n);
    put(len > 0.0 ? n / len : Vec3{});
    for (const auto& p : t) put(p);
    out.append(2, '\0');
  }
  return out;
}

/// Parses binary STL; coincident float positions are welded back into shared vertices.
inline TriMesh read_stl(std::string_view bytes, std::string name = {}) {
  if (bytes.size() < 84) throw ParseError("STL: file shorter than the 84-byte header");
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 80, 4);
  if (bytes.size() != 84 + static_cast<std::size_t>(count) * 50)
    throw ParseError("STL: size does not match triangle count " + std::to_string(count));
  std::vector<Vec3> v;
  std::vector<TriIndex> t;
  v.reserve(count * 3);
  t.reserve(count);
  const char* p = bytes.data() + 84;
  for (std::uint32_t i = 0; i < count; ++i, p += 50) {
    float f[12];
    std::memcpy(f, p, sizeof f);
    const auto base = static_cast<std::uint32_t>(v.size());
    for (int k = 0; k < 3; ++k) v.push_back({f[3 + 3 * k], f[4 + 3 * k], f[5 + 3 * k]});
    t.push_back({base, base + 1, base + 2});
  }
  return TriMesh::cleaned(v, t, std::move(name));
}

namespace detail {

inline void append_double(std::string& out, double d) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, d);
  out.append(buf, r.ptr);
}

inline double parse_double(std::string_view s, std::size_t line) {
  double d = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), d);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParseError("OBJ line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return d;
}

}  // namespace detail

/// Shortest round-trip decimal form, so re-reading yields bit-identical coordinates.
inline std::string write_obj(const TriMesh& m) {
  std::string out;
  if (!m.name().empty()) out += "o " + m.name() + "\n";
  for (const auto& v : m.vertices()) {
    out += "v ";
    detail::append_double(out, v.x);
    out += ' ';
    detail::append_double(out, v.y);
    out += ' ';
    detail::append_double(out, v.z);
    out += '\n';
  }
  for (const auto& t : m.triangles())
    out += "f " + std::to_string(t[0] + 1) + ' ' + std::to_string(t[1] + 1) + ' ' +
           std::to_string(t[2] + 1) + '\n';
  return out;
}

inline TriMesh read_obj(std::string_view text, std::string name = {}) {
  std::vector<Vec3> v;
  std::vector<TriIndex> t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    std::vector<std::string> tok;
    for (std::string s; ls >> s;) tok.push_back(s);
    if (tag == "v") {
      if (tok.size() < 3) throw ParseError("OBJ line " + std::to_string(line_no) + ": short vertex");
      v.push_back({detail::parse_double(tok[0], line_no), detail::parse_double(tok[1], line_no),
                   detail::parse_double(tok[2], line_no)});
    } else if (tag == "f") {
      if (tok.size() != 3)
        throw ParseError("OBJ line " + std::to_string(line_no) + ": only triangular faces are supported");
      TriIndex tri{};
      for (int k = 0; k < 3; ++k) {
        const std::string idx = tok[k].substr(0, tok[k].find('/'));
        long long i = 0;
        const auto r = std::from_chars(idx.data(), idx.data() + idx.size(), i);
        if (r.ec != std::errc() || r.ptr != idx.data() + idx.size() || i < 1 ||
            static_cast<std::size_t>(i) > v.size())
          throw ParseError("OBJ line " + std::to_string(line_no) + ": bad face index '" + tok[k] + "'");
        tri[k] = static_cast<std::uint32_t>(i - 1);
      }
      t.push_back(tri);
    } else if (tag == "o" && name.empty() && !tok.empty()) {
      name = tok[0];
    }
  }
  return TriMesh(std::move(v), std::move(t), std::move(name));
}

inline std::string read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::filesystem::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + p.string() + "'");
}

inline TriMesh load_mesh(const std::filesystem::path& p) {
  const auto bytes = read_file_bytes(p);
  const auto name = p.stem().string();
  return format_from_path(p) == MeshFormat::Stl ? read_stl(bytes, name) : read_obj(bytes, name);
}

inline void save_mesh(const TriMesh& m, const std::filesystem::path& p) {
  write_file_bytes(p, format_from_path(p) == MeshFormat::Stl ? write_stl(m) : write_obj(m));
}

}  // namespace ebrt::geom
