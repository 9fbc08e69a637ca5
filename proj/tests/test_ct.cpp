#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <unistd.h>

#include "ebrt/ct/pipeline.hpp"
#include "ebrt/geometry/mesh_topology.hpp"
#include "ebrt/geometry/primitives.hpp"
#include "support/oracles.hpp"

namespace ebrt::ct {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() / ("ebrt_ct_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Writes the on-disk format byte by byte, independent of the library writer.
void write_stack(const fs::path& dir, int rows, int cols, const std::vector<std::vector<std::uint16_t>>& slices,
                 double slope = 1.0, double intercept = 0.0, double pixel = 1.0, double spacing = 1.0) {
  fs::create_directories(dir);
  std::ofstream meta(dir / "meta.json");
  meta << "{\"rows\": " << rows << ", \"cols\": " << cols << ", \"pixel_size_mm\": " << pixel
       << ", \"slice_spacing_mm\": " << spacing << ", \"slices\": " << slices.size() << ", \"slope\": " << slope
       << ", \"intercept\": " << intercept << ", \"origin_mm\": [0, 0, 0]}";
  for (std::size_t s = 0; s < slices.size(); ++s) {
    std::ofstream out(dir / ("slice_" + std::to_string(s) + ".raw"), std::ios::binary);
    for (auto v : slices[s]) {
      const char bytes[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
      out.write(bytes, 2);
    }
  }
}

SliceStackMeta cube_meta(int n, double pixel = 1.0, double spacing = 1.0, Vec3 origin = {}) {
  SliceStackMeta m;
  m.rows = m.cols = m.slices = n;
  m.pixel_size_mm = pixel;
  m.slice_spacing_mm = spacing;
  m.origin_mm = origin;
  return m;
}

template <class F>
VolumeGrid sample(const SliceStackMeta& m, F f) {
  std::vector<float> v;
  v.reserve(m.voxel_count());
  for (int z = 0; z < m.slices; ++z)
    for (int y = 0; y < m.rows; ++y)
      for (int x = 0; x < m.cols; ++x) v.push_back(static_cast<float>(f(x, y, z)));
  return VolumeGrid(m, std::move(v), "field");
}

// r^2 about the centre of a 64^3 grid with unit voxels.
VolumeGrid radius_squared_field(double pixel = 1.0, double spacing = 1.0) {
  return sample(cube_meta(64, pixel, spacing), [](int x, int y, int z) {
    const double a = x - 31.5, b = y - 31.5, c = z - 31.5;
    return a * a + b * b + c * c;
  });
}

constexpr double kRadius = 24.0;

TEST(SliceStack, TwoSlicesOfZeros) {
  TempDir dir("zeros");
  write_stack(dir.path(), 4, 4, {std::vector<std::uint16_t>(16, 0), std::vector<std::uint16_t>(16, 0)});
  const auto g = load_slice_stack(dir.path());
  EXPECT_EQ(g.nx(), 4);
  EXPECT_EQ(g.ny(), 4);
  EXPECT_EQ(g.nz(), 2);
  ASSERT_EQ(g.scalars().size(), 32u);
  for (float v : g.scalars()) EXPECT_EQ(v, 0.0f);
}

TEST(SliceStack, SlopeAndInterceptApplied) {
  TempDir dir("affine");
  std::vector<std::uint16_t> a(6, 1000), b(6, 0);
  a[1] = 1300;
  b[5] = 65535;
  write_stack(dir.path(), 2, 3, {a, b}, 1.0, -1000.0);
  const auto g = load_slice_stack(dir.path());
  EXPECT_EQ(g.at(0, 0, 0), 0.0f);
  EXPECT_EQ(g.at(1, 0, 0), 300.0f);
  EXPECT_EQ(g.at(0, 0, 1), -1000.0f);
  EXPECT_EQ(g.at(2, 1, 1), 64535.0f);
}

TEST(SliceStack, RowMajorSliceMajorOrder) {
  TempDir dir("order");
  std::vector<std::vector<std::uint16_t>> slices(3, std::vector<std::uint16_t>(6));
  for (int s = 0; s < 3; ++s)
    for (int k = 0; k < 6; ++k) slices[s][k] = static_cast<std::uint16_t>(100 * s + k);
  write_stack(dir.path(), 2, 3, slices);
  const auto g = load_slice_stack(dir.path());
  // Row 1, column 2 of slice 2 is element 5 of that slice.
  EXPECT_EQ(g.at(2, 1, 2), 205.0f);
  EXPECT_EQ(g.at(0, 1, 1), 103.0f);
}

TEST(SliceStack, SpherePhantomCountAboveIsoMatchesGenerator) {
  TempDir dir("sphere");
  const int n = 40;
  const double iso = -300.0;
  std::vector<std::vector<std::uint16_t>> slices;
  std::size_t expected_above = 0;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> noise(-3, 3);
  for (int z = 0; z < n; ++z) {
    std::vector<std::uint16_t> s;
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double r = std::sqrt((x - 19.5) * (x - 19.5) + (y - 19.5) * (y - 19.5) + (z - 19.5) * (z - 19.5));
        const int stored = (r < 12.0 ? 1000 : (r < 15.0 ? 650 : 0)) + 20 + noise(rng);
        s.push_back(static_cast<std::uint16_t>(stored));
        if (stored - 1000.0 > iso) ++expected_above;
      }
    slices.push_back(std::move(s));
  }
  write_stack(dir.path(), n, n, slices, 1.0, -1000.0);
  const auto g = load_slice_stack(dir.path());
  const auto above = std::count_if(g.scalars().begin(), g.scalars().end(), [&](float v) { return v > iso; });
  EXPECT_EQ(static_cast<std::size_t>(above), expected_above);
}

TEST(SliceStack, MissingMetadataIsAnError) {
  TempDir dir("nometa");
  write_stack(dir.path(), 2, 2, {std::vector<std::uint16_t>(4), std::vector<std::uint16_t>(4)});
  fs::remove(dir.path() / "meta.json");
  EXPECT_THROW(load_slice_stack(dir.path()), ParseError);
}

TEST(SliceStack, SliceSizeMismatchIsAnError) {
  TempDir dir("short");
  write_stack(dir.path(), 2, 2, {std::vector<std::uint16_t>(4), std::vector<std::uint16_t>(3)});
  EXPECT_THROW(load_slice_stack(dir.path()), ParseError);
}

TEST(SliceStack, GapInSliceIndicesIsAnError) {
  TempDir dir("gap");
  write_stack(dir.path(), 2, 2,
              {std::vector<std::uint16_t>(4), std::vector<std::uint16_t>(4), std::vector<std::uint16_t>(4)});
  fs::rename(dir.path() / "slice_1.raw", dir.path() / "slice_3.raw");
  EXPECT_THROW(load_slice_stack(dir.path()), ParseError);
}

TEST(SliceStack, DuplicateSliceIndexIsAnError) {
  TempDir dir("dup");
  write_stack(dir.path(), 2, 2, {std::vector<std::uint16_t>(4), std::vector<std::uint16_t>(4)});
  fs::copy_file(dir.path() / "slice_1.raw", dir.path() / "slice_01.raw");
  EXPECT_THROW(load_slice_stack(dir.path()), ParseError);
}

TEST(SliceStack, SliceCountDisagreeingWithMetadataIsAnError) {
  TempDir dir("count");
  write_stack(dir.path(), 2, 2, {std::vector<std::uint16_t>(4), std::vector<std::uint16_t>(4)});
  std::ofstream(dir.path() / "slice_2.raw", std::ios::binary) << std::string(8, '\0');
  EXPECT_THROW(load_slice_stack(dir.path()), ParseError);
}

TEST(SliceStack, InvalidMetadataRejected) {
  const std::map<int, std::string> two{{0, std::string(8, '\0')}, {1, std::string(8, '\0')}};
  const std::string ok_tail = R"("slice_spacing_mm": 1, "slices": 2})";
  EXPECT_NO_THROW(parse_slice_stack(R"({"rows": 2, "cols": 2, "pixel_size_mm": 1, )" + ok_tail, two));
  EXPECT_THROW(parse_slice_stack(R"({"rows": 0, "cols": 2, "pixel_size_mm": 1, )" + ok_tail, two), ParseError);
  EXPECT_THROW(parse_slice_stack(R"({"rows": 2, "cols": 2, "pixel_size_mm": -1, )" + ok_tail, two), ParseError);
  EXPECT_THROW(parse_slice_stack(R"({"rows": 2, "cols": 2, "pixel_size_mm": "1", )" + ok_tail, two), ParseError);
  EXPECT_THROW(parse_slice_stack(R"({"rows": 2, "cols": 2, )" + ok_tail, two), ParseError);
  EXPECT_THROW(parse_slice_stack("not json", two), ParseError);
  EXPECT_THROW(parse_slice_stack(R"({"rows": 2, "cols": 2, "pixel_size_mm": 1, "slice_spacing_mm": 1, "slices": 1})",
                                 {{0, std::string(8, '\0')}}),
               ParseError);
}

TEST(SliceStack, WriterRoundTrip) {
  TempDir dir("writer");
  auto meta = cube_meta(12, 0.8, 2.5, {-4.4, -4.4, 10});
  meta.intercept = -1000.0;
  const auto stored = sphere_phantom(meta, {0, 0, 24}, 3.0, 1.0);
  write_slice_stack(dir.path(), meta, stored);
  const auto g = load_slice_stack(dir.path());
  EXPECT_EQ(g.meta().pixel_size_mm, 0.8);
  EXPECT_EQ(g.meta().slice_spacing_mm, 2.5);
  EXPECT_EQ(g.meta().origin_mm, meta.origin_mm);
  for (std::size_t i = 0; i < stored.size(); ++i) ASSERT_EQ(g.scalars()[i], stored[i] - 1000.0f);
}

TEST(MarchingCubes, UniformGridGivesEmptyMesh) {
  const auto g = sample(cube_meta(8), [](int, int, int) { return 5.0; });
  for (double iso : {4.0, 5.0, 6.0}) {
    const auto m = marching_cubes(g, iso);
    EXPECT_TRUE(m.mesh.empty());
    EXPECT_EQ(m.status, IsoStatus::OutOfRange);
    EXPECT_FALSE(m.warning.empty());
  }
}

TEST(MarchingCubes, IsoAtRangeEndGivesWarning) {
  const auto g = radius_squared_field();
  const auto [lo, hi] = g.value_range();
  EXPECT_EQ(marching_cubes(g, lo).status, IsoStatus::OutOfRange);
  EXPECT_EQ(marching_cubes(g, hi).status, IsoStatus::OutOfRange);
  EXPECT_EQ(marching_cubes(g, hi + 1).status, IsoStatus::OutOfRange);
  EXPECT_EQ(marching_cubes(g, 100.0).status, IsoStatus::Ok);
}

TEST(MarchingCubes, SingleCornerCellHandChecked) {
  // Corner (0,0,0) low, the rest high: one triangle cutting the three edges at their midpoints.
  const auto g = sample(cube_meta(2), [](int x, int y, int z) { return x + y + z == 0 ? 0.0 : 1.0; });
  const auto m = marching_cubes(g, 0.5);
  ASSERT_EQ(m.mesh.triangle_count(), 1u);
  std::vector<Vec3> v = m.mesh.vertices();
  std::sort(v.begin(), v.end(), [](const Vec3& a, const Vec3& b) { return a.x + 2 * a.y < b.x + 2 * b.y; });
  EXPECT_EQ(v[0], (Vec3{0, 0, 0.5}));
  EXPECT_EQ(v[1], (Vec3{0.5, 0, 0}));
  EXPECT_EQ(v[2], (Vec3{0, 0.5, 0}));
  // The normal faces the low corner.
  const Vec3 n = geom::triangle_normal(m.mesh.triangle(0));
  EXPECT_LT(n.x, 0.0);
  EXPECT_LT(n.y, 0.0);
  EXPECT_LT(n.z, 0.0);
}

TEST(MarchingCubes, SphereFieldMatchesAnalyticVolumeAndArea) {
  const auto m = marching_cubes(radius_squared_field(), kRadius * kRadius);
  ASSERT_EQ(m.status, IsoStatus::Ok);
  const double volume = (4.0 / 3.0) * std::numbers::pi * std::pow(kRadius, 3);
  const double area = 4.0 * std::numbers::pi * kRadius * kRadius;
  // r^2 grows outward, so normals (toward lower values) face inward and the volume is negative.
  EXPECT_LT(testing::enclosed_volume(m.mesh), 0.0);
  EXPECT_NEAR(std::abs(testing::enclosed_volume(m.mesh)), volume, 0.02 * volume);
  EXPECT_NEAR(testing::total_area(m.mesh), area, 0.02 * area);
  EXPECT_TRUE(geom::is_watertight(m.mesh));
  EXPECT_EQ(geom::euler_characteristic(m.mesh), 2);
}

TEST(MarchingCubes, TissueAboveAirFacesOutward) {
  const auto m = marching_cubes(sample(cube_meta(32), [](int x, int y, int z) {
                                  const double r = std::hypot(x - 15.5, y - 15.5, z - 15.5);
                                  return r < 10.0 ? 0.0 : -1000.0;
                                }),
                                -300.0);
  EXPECT_GT(testing::enclosed_volume(m.mesh), 0.0);
  EXPECT_TRUE(geom::is_watertight(m.mesh));
}

TEST(MarchingCubes, VerticesLieOnStraddlingEdges) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(4.0, 20.0);
  std::vector<Vec3> centres;
  for (int i = 0; i < 5; ++i) centres.push_back({u(rng), u(rng), u(rng)});
  const auto meta = cube_meta(24, 0.7, 1.3, {-3.0, 2.0, 5.0});
  const auto g = sample(meta, [&](int x, int y, int z) {
    double f = 0.0;
    for (const auto& c : centres) f += std::exp(-geom::norm2(Vec3{double(x), double(y), double(z)} - c) / 18.0);
    return f;
  });
  const double iso = 0.37;
  const auto m = marching_cubes(g, iso);
  ASSERT_GT(m.mesh.triangle_count(), 100u);
  for (const auto& p : m.mesh.vertices()) {
    const double c[3] = {(p.x - meta.origin_mm.x) / meta.pixel_size_mm, (p.y - meta.origin_mm.y) / meta.pixel_size_mm,
                         (p.z - meta.origin_mm.z) / meta.slice_spacing_mm};
    int axis = -1;
    int base[3];
    for (int k = 0; k < 3; ++k) {
      base[k] = static_cast<int>(std::lround(c[k]));
      if (std::abs(c[k] - base[k]) > 1e-9) {
        ASSERT_EQ(axis, -1) << "vertex off the grid lines";
        axis = k;
        base[k] = static_cast<int>(std::floor(c[k]));
      }
    }
    ASSERT_NE(axis, -1);
    int top[3] = {base[0], base[1], base[2]};
    ++top[axis];
    const double v0 = g.at(base[0], base[1], base[2]);
    const double v1 = g.at(top[0], top[1], top[2]);
    EXPECT_TRUE((v0 < iso) != (v1 < iso));
    const double t = c[axis] - base[axis];
    EXPECT_NEAR(v0 + t * (v1 - v0), iso, 1e-6);
  }
}

TEST(MarchingCubes, ScalingMetadataScalesExtentsExactly) {
  const auto extents = [](const IsoMesh& m) { return geom::mesh_aabb(m.mesh).max - geom::mesh_aabb(m.mesh).min; };
  const auto base = marching_cubes(radius_squared_field(1.0, 1.0), 400.0);
  const auto wide = marching_cubes(radius_squared_field(2.0, 1.0), 400.0);
  const auto tall = marching_cubes(radius_squared_field(1.0, 2.0), 400.0);
  const Vec3 e = extents(base);
  EXPECT_EQ(extents(wide).x, 2.0 * e.x);
  EXPECT_EQ(extents(wide).y, 2.0 * e.y);
  EXPECT_EQ(extents(wide).z, e.z);
  EXPECT_EQ(extents(tall).x, e.x);
  EXPECT_EQ(extents(tall).y, e.y);
  EXPECT_EQ(extents(tall).z, 2.0 * e.z);
  EXPECT_EQ(wide.mesh.triangle_count(), base.mesh.triangle_count());
}

TEST(MarchingCubes, SeparateBodiesAndLargestComponent) {
  const auto g = sample(cube_meta(40), [](int x, int y, int z) {
    const double a = std::hypot(x - 12.0, y - 20.0, z - 20.0);
    const double b = std::hypot(x - 30.0, y - 20.0, z - 20.0);
    return std::min(a / 9.0, b / 4.0);
  });
  const auto both = marching_cubes(g, 1.0);
  const auto parts = geom::connected_components(both.mesh);
  ASSERT_EQ(parts.size(), 2u);
  for (const auto& p : parts) {
    EXPECT_TRUE(geom::is_watertight(p));
    EXPECT_EQ(geom::euler_characteristic(p), 2);
  }
  const auto big = marching_cubes(g, 1.0, {.largest_component = true});
  EXPECT_EQ(geom::connected_components(big.mesh).size(), 1u);
  EXPECT_LT(geom::mesh_aabb(big.mesh).max.x, 22.0);
}

TEST(MarchingCubes, DeterministicAcrossRunsAndThreadCounts) {
  const auto g = radius_squared_field();
  const auto a = marching_cubes(g, 300.0, {.threads = 1});
  const auto b = marching_cubes(g, 300.0, {.threads = 1});
  const auto c = marching_cubes(g, 300.0, {.threads = 5});
  EXPECT_EQ(a.mesh.vertices(), b.mesh.vertices());
  EXPECT_EQ(a.mesh.triangles(), b.mesh.triangles());
  EXPECT_EQ(a.mesh.vertices(), c.mesh.vertices());
  EXPECT_EQ(a.mesh.triangles(), c.mesh.triangles());
}

TEST(MarchingCubes, ProvenanceRecorded) {
  const auto m = marching_cubes(radius_squared_field(), 300.0);
  EXPECT_EQ(m.iso, 300.0);
  EXPECT_EQ(m.source_id, "field");
  EXPECT_EQ(m.decimation_ratio, 1.0);
}

class Decimation : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { sphere_ = new IsoMesh(marching_cubes(radius_squared_field(), kRadius * kRadius)); }
  static void TearDownTestSuite() {
    delete sphere_;
    sphere_ = nullptr;
  }
  static IsoMesh* sphere_;
};

IsoMesh* Decimation::sphere_ = nullptr;

TEST_F(Decimation, TargetEqualToCountIsANoOp) {
  const auto d = decimate(*sphere_, sphere_->mesh.triangle_count());
  EXPECT_EQ(d.mesh.vertices(), sphere_->mesh.vertices());
  EXPECT_EQ(d.mesh.triangles(), sphere_->mesh.triangles());
  EXPECT_EQ(d.decimation_ratio, 1.0);
}

TEST_F(Decimation, TargetOutOfRangeRejected) {
  EXPECT_THROW(decimate(*sphere_, 3), InvalidArgument);
  EXPECT_THROW(decimate(*sphere_, sphere_->mesh.triangle_count() + 1), InvalidArgument);
}

TEST_F(Decimation, TenfoldSphereReduction) {
  const std::size_t target = sphere_->mesh.triangle_count() / 10;
  const auto d = decimate(*sphere_, target);
  const double n = static_cast<double>(d.mesh.triangle_count());
  EXPECT_NEAR(n, static_cast<double>(target), 0.05 * target);
  const double v0 = testing::enclosed_volume(sphere_->mesh);
  const double v1 = testing::enclosed_volume(d.mesh);
  EXPECT_LT(std::abs(v1 - v0) / std::abs(v0), 0.02);
  EXPECT_TRUE(geom::is_watertight(d.mesh));
  EXPECT_EQ(geom::euler_characteristic(d.mesh), 2);
  EXPECT_LT(testing::sampled_hausdorff(d.mesh, sphere_->mesh), std::sqrt(3.0));
  EXPECT_NEAR(d.decimation_ratio, n / sphere_->mesh.triangle_count(), 1e-12);
}

TEST_F(Decimation, StaysInsideOriginalBounds) {
  const auto box = geom::mesh_aabb(sphere_->mesh).inflated(1e-6);
  for (std::size_t target : {sphere_->mesh.triangle_count() / 2, std::size_t{400}, std::size_t{40}}) {
    const auto d = decimate(*sphere_, target);
    EXPECT_TRUE(box.contains(geom::mesh_aabb(d.mesh))) << target;
  }
}

TEST_F(Decimation, NoFaceFlipsAgainstTheSurface) {
  // Every surviving face still points toward the centre (the inward side of this field).
  const auto d = decimate(*sphere_, 500);
  for (std::size_t i = 0; i < d.mesh.triangle_count(); ++i) {
    const auto t = d.mesh.triangle(i);
    const Vec3 c = (t[0] + t[1] + t[2]) / 3.0 - Vec3{31.5, 31.5, 31.5};
    EXPECT_LT(geom::dot(geom::triangle_normal(t), c), 0.0);
  }
}

TEST_F(Decimation, Deterministic) {
  const auto a = decimate(*sphere_, 1000);
  const auto b = decimate(*sphere_, 1000);
  EXPECT_EQ(a.mesh.vertices(), b.mesh.vertices());
  EXPECT_EQ(a.mesh.triangles(), b.mesh.triangles());
}

TEST(DecimationOrder, FlatInteriorGoesBeforeBoxCorners) {
  // Finely tessellated box: its faces are dense flat patches.
  const auto box = geom::make_box({0, 0, 0}, {100, 60, 40}, 4.0);
  const auto d = decimate_mesh(box, box.triangle_count() / 10);
  EXPECT_LT(d.triangle_count(), box.triangle_count() / 5);
  for (double x : {0.0, 100.0})
    for (double y : {0.0, 60.0})
      for (double z : {0.0, 40.0}) {
        const Vec3 corner{x, y, z};
        EXPECT_NE(std::find(d.vertices().begin(), d.vertices().end(), corner), d.vertices().end()) << corner;
      }
  EXPECT_NEAR(testing::enclosed_volume(d), 100.0 * 60.0 * 40.0, 1e-6);
  EXPECT_TRUE(geom::is_watertight(d));
}

TEST(DecimationOrder, BoxReducesToTwelveTriangles) {
  const auto box = geom::make_box({-5, -5, -5}, {5, 5, 5}, 1.0);
  const auto d = decimate_mesh(box, 12);
  EXPECT_EQ(d.triangle_count(), 12u);
  EXPECT_NEAR(testing::enclosed_volume(d), 1000.0, 1e-9);
}

TEST(Export, StlAndObjRoundTrip) {
  TempDir dir("export");
  const auto m = marching_cubes(radius_squared_field(), 200.0);
  export_mesh(m, dir.path() / "skin.stl");
  export_mesh(m, dir.path() / "skin.obj");
  const auto bytes = geom::read_file_bytes(dir.path() / "skin.stl");
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 80, 4);
  EXPECT_EQ(count, m.mesh.triangle_count());
  EXPECT_EQ(geom::load_mesh(dir.path() / "skin.stl").triangle_count(), m.mesh.triangle_count());
  const auto obj = geom::load_mesh(dir.path() / "skin.obj");
  EXPECT_EQ(obj.vertices(), m.mesh.vertices());
  EXPECT_EQ(obj.triangles(), m.mesh.triangles());
  EXPECT_THROW(export_mesh(IsoMesh{}, dir.path() / "empty.stl"), InvalidArgument);
}

TEST(Pipeline, SpherePhantomAtSkinIso) {
  TempDir dir("phantom");
  auto meta = cube_meta(64, 2.0, 2.5, {-63, -63, -78.75});
  meta.intercept = -1000.0;
  const double radius = 50.0, edge = 6.0;
  write_slice_stack(dir.path(), meta, sphere_phantom(meta, {0, 0, 0}, radius, edge));
  const auto m = reconstruct(dir.path(), {.target_triangles = 3000});
  ASSERT_EQ(m.status, IsoStatus::Ok);
  // The ramp crosses -300 where 70% of the way in: r = radius + edge/2 - 0.7 * edge.
  const double r_iso = radius + edge / 2 - 0.7 * edge;
  const double volume = 4.0 / 3.0 * std::numbers::pi * std::pow(r_iso, 3);
  EXPECT_NEAR(testing::enclosed_volume(m.mesh), volume, 0.02 * volume);
  EXPECT_NEAR(static_cast<double>(m.mesh.triangle_count()), 3000.0, 150.0);
  EXPECT_TRUE(geom::is_watertight(m.mesh));
  EXPECT_EQ(m.iso, kDefaultSkinIso);
  EXPECT_EQ(m.source_id, dir.path().filename().string());
}

}  // namespace
}  // namespace ebrt::ct
