#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <random>

#include "ebrt/collision/scene.hpp"
#include "ebrt/geometry/mesh_topology.hpp"
#include "ebrt/linac/builtin.hpp"
#include "ebrt/linac/kinematics.hpp"
#include "support/oracles.hpp"

namespace ebrt::linac {
namespace {

using Mat4 = std::array<std::array<double, 4>, 4>;

// Plain 4x4 arithmetic, independent of the Transform class.
Mat4 mul(const Mat4& a, const Mat4& b) {
  Mat4 c{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Vec3 mul(const Mat4& m, const Vec3& p) {
  return {m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
          m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
          m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3]};
}

const PlacedComponent& find(const std::vector<PlacedComponent>& placed, const std::string& id) {
  return collision::find_component(placed, id);
}

MachinePtr varian() { return builtin_catalog(4.0)->machine("varian_trilogy"); }

MachineState random_state(std::mt19937_64& rng, const MotionLimits& l) {
  auto u = [&](const Range& r) { return std::uniform_real_distribution<double>(r.min, r.max)(rng); };
  MachineState s;
  s.gantry_deg = u(l.gantry_deg);
  s.collimator_deg = u(l.collimator_deg);
  s.couch_rotation_deg = u(l.couch_rotation_deg);
  s.couch_lateral_mm = u(l.couch_lateral_mm);
  s.couch_longitudinal_mm = u(l.couch_longitudinal_mm);
  s.couch_vertical_mm = u(l.couch_vertical_mm);
  return s;
}

// ---------------------------------------------------------------- forward kinematics

TEST(ForwardKinematics, HomeStateIsIdentity) {
  const auto m = varian();
  std::vector<Attachment> atts{m->attachment("head_frame"), m->attachment("electron_cone")};
  const auto placed = forward_kinematics(*m, {}, atts);
  ASSERT_EQ(placed.size(), 6u);
  for (const auto* id : {kGantryId, kCollimatorId, kCouchId, kCouchBaseId})
    EXPECT_EQ(find(placed, id).world, Transform::identity()) << id;
  EXPECT_EQ(find(placed, "head_frame").world, m->mount(Mount::Couch) * Transform::translate(0, 450, 0));
  EXPECT_EQ(find(placed, "electron_cone").world, Transform::translate(0, 0, 420));
  // The couch top surface passes through isocentre height.
  EXPECT_EQ(geom::mesh_aabb(m->couch_top()->mesh()).max.z, 0.0);
}

TEST(ForwardKinematics, Gantry90IsPureRotation) {
  const auto m = varian();
  MachineState s;
  s.gantry_deg = 90;
  const auto placed = forward_kinematics(*m, s);
  const Transform& g = find(placed, kGantryId).world;
  EXPECT_EQ(g.translation(), Vec3{});
  const Mat4 ry90{{{0, 0, 1, 0}, {0, 1, 0, 0}, {-1, 0, 0, 0}, {0, 0, 0, 1}}};
  const auto gm = g.matrix();
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(gm[i], ry90[i / 4][i % 4], 1e-15);
  // Collimator mount point follows the gantry.
  const Vec3 home_mount{0, 0, 420};
  const Vec3 moved = find(placed, kCollimatorId).world.apply(home_mount);
  EXPECT_NEAR(distance(moved, g.apply(home_mount)), 0.0, 1e-12);
  EXPECT_NEAR(moved.x, 420.0, 1e-12);
  EXPECT_NEAR(moved.z, 0.0, 1e-12);
}

TEST(ForwardKinematics, CouchRotationThenTranslationMatchesMatrixProduct) {
  const auto m = varian();
  Scene scene(m);
  scene.set_patient(builtin_catalog(4.0)->phantom_mesh("elliptical_phantom"), Transform::identity());
  MachineState s;
  s.couch_rotation_deg = 90;
  s.couch_longitudinal_mm = 100;
  scene.set_state(s);
  const auto placed = scene.placed();
  const Mat4 rz90{{{0, -1, 0, 0}, {1, 0, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}};
  const Mat4 t{{{1, 0, 0, 0}, {0, 1, 0, 100}, {0, 0, 1, 0}, {0, 0, 0, 1}}};
  const Mat4 oracle = mul(rz90, t);
  const Transform& pt = find(placed, kPatientId).world;
  for (const Vec3 p : {Vec3{0, 250, 40}, Vec3{0, -120, 7.5}, Vec3{0, 0, 0}}) {
    const Vec3 a = pt.apply(p);
    const Vec3 b = mul(oracle, p);
    EXPECT_NEAR(a.x, b.x, 1e-9);
    EXPECT_NEAR(a.y, b.y, 1e-9);
    EXPECT_NEAR(a.z, b.z, 1e-9);
  }
  // (0, y, z) lands at (-(y + 100), 0, z).
  EXPECT_NEAR(pt.apply({0, 250, 40}).x, -350.0, 1e-9);
}

TEST(ForwardKinematics, GantryRoundTripReturnsHome) {
  const auto m = varian();
  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) {
    MachineState s;
    s.gantry_deg = std::uniform_real_distribution<double>(-185, 185)(rng);
    MachineState back;
    back.gantry_deg = -s.gantry_deg;
    const auto there = forward_kinematics(*m, s);
    const auto undo = forward_kinematics(*m, back);
    for (const auto* id : {kGantryId, kCollimatorId}) {
      const Transform round = find(undo, id).world * find(there, id).world;
      EXPECT_LE(max_abs_diff(round, Transform::identity()), 1e-9) << id;
    }
  }
}

TEST(ForwardKinematics, AttachmentsInheritMountTransformExactly) {
  const auto m = varian();
  std::vector<Attachment> atts;
  for (const auto& a : m->catalog()) atts.push_back(a);
  std::mt19937_64 rng(32);
  for (int i = 0; i < 100; ++i) {
    const auto s = random_state(rng, m->limits());
    const auto placed = forward_kinematics(*m, s, atts);
    const Transform& couch = find(placed, kCouchId).world;
    const Transform& coll = find(placed, kCollimatorId).world;
    for (const auto& a : atts) {
      const Transform expected = compose(a.mount == Mount::Couch ? couch : coll, a.offset);
      EXPECT_EQ(find(placed, a.id).world, expected);
    }
  }
}

TEST(ForwardKinematics, StrictModeRejectsOutOfRange) {
  const auto m = varian();
  MachineState s;
  s.gantry_deg = 200;
  EXPECT_THROW(forward_kinematics(*m, s, {}, {}, true), InvalidArgument);
  EXPECT_EQ(find(forward_kinematics(*m, s), kGantryId).world, Transform::rot_y(185));
}

TEST(ForwardKinematics, DuplicateAttachmentIdsRejected) {
  const auto m = varian();
  std::vector<Attachment> atts{m->attachment("head_frame"), m->attachment("head_frame")};
  EXPECT_THROW(forward_kinematics(*m, {}, atts), Conflict);
}

// ---------------------------------------------------------------- clamp

TEST(ClampState, Examples) {
  const auto m = varian();
  MachineState in;
  in.gantry_deg = 30;
  in.couch_vertical_mm = -100;
  EXPECT_EQ(clamp_state(*m, in), in);
  MachineState g;
  g.gantry_deg = 200;
  EXPECT_EQ(clamp_state(*m, g).gantry_deg, 185.0);
  MachineState v;
  v.couch_vertical_mm = -5000;
  EXPECT_EQ(clamp_state(*m, v).couch_vertical_mm, m->limits().couch_vertical_mm.min);
}

TEST(ClampState, Idempotent) {
  const auto m = varian();
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> wild(-3000, 3000);
  for (int i = 0; i < 200; ++i) {
    MachineState s{wild(rng), wild(rng), wild(rng), wild(rng), wild(rng), wild(rng), 100, 100};
    const auto once = clamp_state(*m, s);
    EXPECT_EQ(clamp_state(*m, once), once);
    EXPECT_TRUE(within_limits(m->limits(), once));
  }
}

// ---------------------------------------------------------------- attachments

TEST(Attachments, AttachDetachRoundTrip) {
  const auto m = varian();
  const Scene original(m);
  const Scene with = attach(original, m->attachment("head_frame"));
  EXPECT_EQ(with.placed().size(), original.placed().size() + 1);
  EXPECT_EQ(detach(with, "head_frame"), original);
}

TEST(Attachments, TwoDistinctBothPlaced) {
  Scene s(varian());
  s.attach("head_frame");
  s.attach("stereotactic_cone");
  const auto placed = s.placed();
  EXPECT_NO_THROW(find(placed, "head_frame"));
  EXPECT_NO_THROW(find(placed, "stereotactic_cone"));
  EXPECT_EQ(find(placed, "head_frame").role, ComponentRole::CouchAttachment);
  EXPECT_EQ(find(placed, "stereotactic_cone").role, ComponentRole::CollimatorAttachment);
}

TEST(Attachments, Errors) {
  Scene s(varian());
  s.attach("head_frame");
  EXPECT_THROW(s.attach("head_frame"), Conflict);
  EXPECT_THROW(s.detach("breast_board"), NotFound);
  EXPECT_THROW(s.attach("no_such_thing"), NotFound);
}

TEST(Attachments, CouchAttachmentsJoinDefaultPairs) {
  Scene s(varian());
  s.attach("head_frame");
  s.attach("electron_cone");
  const auto pairs = collision::default_pairs(s.placed());
  auto has = [&](const std::string& a, const std::string& b) {
    return std::any_of(pairs.begin(), pairs.end(), [&](const auto& p) { return p.source == a && p.target == b; });
  };
  EXPECT_TRUE(has("collimator", "head_frame"));
  EXPECT_TRUE(has("electron_cone", "head_frame"));
  EXPECT_TRUE(has("electron_cone", "couch"));
  EXPECT_TRUE(has("couch", "gantry"));
}

// ---------------------------------------------------------------- beam

TEST(BeamFrustum, VerticalBeamHasExactFieldAtIsocentre) {
  const auto m = varian();
  const auto beam = beam_frustum(*m, {});
  EXPECT_TRUE(geom::is_watertight(beam));
  EXPECT_GT(geom::signed_volume(beam), 0.0);
  EXPECT_EQ(beam.vertices()[0], (Vec3{0, 0, 1000}));
  int at_iso = 0;
  for (const auto& v : beam.vertices())
    if (v.z == 0.0) {
      EXPECT_EQ(std::abs(v.x), 50.0);
      EXPECT_EQ(std::abs(v.y), 50.0);
      ++at_iso;
    }
  EXPECT_EQ(at_iso, 4);
  EXPECT_LT(geom::mesh_aabb(beam).min.z, 0.0);
}

TEST(BeamFrustum, CollimatorRotatesField) {
  const auto m = varian();
  MachineState s;
  s.collimator_deg = 45;
  const auto beam = beam_frustum(*m, s);
  const double r = 50.0 * std::sqrt(2.0);
  for (std::size_t i = 1; i <= 4; ++i) {
    const Vec3 v = beam.vertices()[i];
    EXPECT_NEAR(v.z, 0.0, 1e-12);
    // Corners sit on the axes after a 45 degree turn.
    EXPECT_NEAR(std::min(std::abs(v.x), std::abs(v.y)), 0.0, 1e-9);
    EXPECT_NEAR(std::max(std::abs(v.x), std::abs(v.y)), r, 1e-9);
  }
}

TEST(BeamFrustum, HorizontalBeamApexFromKinematics) {
  const auto m = varian();
  MachineState s;
  s.gantry_deg = 90;
  const auto beam = beam_frustum(*m, s);
  const auto placed = forward_kinematics(*m, s);
  const Vec3 oracle = find(placed, kCollimatorId).world.apply({0, 0, m->sad_mm()});
  EXPECT_NEAR(distance(beam.vertices()[0], oracle), 0.0, 1e-12);
  EXPECT_NEAR(beam.vertices()[0].x, 1000.0, 1e-12);
  EXPECT_NEAR(std::abs(beam.vertices()[0].z), 0.0, 1e-12);
}

TEST(BeamFrustum, ApexAtSadForRandomStates) {
  const auto m = varian();
  std::mt19937_64 rng(34);
  for (int i = 0; i < 100; ++i) {
    const auto s = random_state(rng, m->limits());
    EXPECT_NEAR(norm(beam_frustum(*m, s).vertices()[0]), m->sad_mm(), 1e-9);
    EXPECT_NEAR(norm(source_position(*m, s)), m->sad_mm(), 1e-9);
  }
}

TEST(BeamFrustum, RejectsNonPositiveField) {
  const auto m = varian();
  MachineState s;
  s.field_x_mm = 0;
  EXPECT_THROW(beam_frustum(*m, s), InvalidArgument);
  Scene scene(m);
  s.field_x_mm = -5;
  EXPECT_THROW(scene.set_state(s), InvalidArgument);
}

TEST(BeamCouch, VerticalBeamHitsCouch) {
  Scene s(varian());
  const auto r = collision::beam_couch_intersection(s.beam(), s.placed());
  ASSERT_EQ(r.size(), 1u);
  EXPECT_TRUE(r[0].colliding);
  EXPECT_EQ(r[0].target, "couch");
}

TEST(BeamCouch, HorizontalBeamMissesLoweredCouch) {
  Scene s(varian());
  MachineState st;
  st.gantry_deg = 90;
  st.couch_vertical_mm = -200;
  s.set_state(st);
  const auto r = collision::beam_couch_intersection(s.beam(), s.placed());
  EXPECT_FALSE(r[0].colliding);
  EXPECT_GT(r[0].distance_mm, 0.0);
}

TEST(BeamCouch, GrazingLateralBeamMatchesBruteForce) {
  const auto m = varian();
  Scene s(m);
  int hits = 0;
  for (double vert = -140.0; vert <= -60.0; vert += 8.0) {
    MachineState st;
    st.gantry_deg = 90;
    st.couch_vertical_mm = vert;
    s.set_state(st);
    const auto beam = s.beam();
    const auto placed = s.placed();
    const auto& couch = find(placed, kCouchId);
    const auto r = collision::beam_couch_intersection(beam, placed);
    const auto wb = testing::world_triangles(beam, Transform::identity());
    const auto wc = testing::world_triangles(couch.shape->mesh(), couch.world);
    EXPECT_EQ(r[0].colliding, testing::brute_force_intersect(wb, wc)) << vert;
    if (!r[0].colliding) {
      EXPECT_NEAR(r[0].distance_mm, testing::brute_force_distance(wb, wc), 1e-6);
    }
    hits += r[0].colliding;
  }
  EXPECT_GT(hits, 0);
  EXPECT_LT(hits, 11);
}

// ---------------------------------------------------------------- catalogue

TEST(Builtin, TwoMachinesAndAPhantom) {
  const auto c = builtin_catalog(4.0);
  EXPECT_GE(c->machines.size(), 2u);
  EXPECT_GE(c->phantoms.size(), 1u);
  EXPECT_NE(c->machines[0]->spec().gantry.size(), 0u);
  EXPECT_THROW(c->machine("cobalt_60"), NotFound);
}

TEST(Builtin, AllMeshesWatertight) {
  const auto c = builtin_catalog(2.0);
  for (const auto& m : c->machines) {
    for (const auto* id : {"gantry", "collimator", "couch", "couch_base"})
      EXPECT_TRUE(geom::is_watertight(m->mesh(id)->mesh())) << m->id() << " " << id;
    for (const auto& a : m->catalog()) EXPECT_TRUE(geom::is_watertight(a.mesh->mesh())) << a.id;
  }
  EXPECT_TRUE(geom::is_watertight(c->phantom_mesh("elliptical_phantom")->mesh()));
}

TEST(Builtin, FullDetailSceneIsAboutOneHundredThousandTriangles) {
  const auto c = builtin_catalog();
  for (const auto& m : c->machines) {
    EXPECT_GT(m->base_triangle_count(), 60000u) << m->id();
    EXPECT_LT(m->base_triangle_count(), 160000u) << m->id();
  }
  EXPECT_LT(builtin_catalog(4.0)->machines[0]->base_triangle_count(), 10000u);
}

TEST(Builtin, PhantomSitsCentredOnCouchMount) {
  const auto c = builtin_catalog(2.0);
  Scene s(c->machine("varian_trilogy"));
  const auto phantom = c->phantom_mesh("elliptical_phantom");
  s.set_patient(phantom);
  const auto& p = find(s.placed(), kPatientId);
  const auto box = geom::mesh_aabb(p.shape->mesh(), p.world);
  // Faceting moves the bounding box a little off the analytic ellipsoid.
  EXPECT_NEAR(box.center().x, 0.0, 0.5);
  EXPECT_NEAR(box.center().y, 0.0, 0.5);
  EXPECT_NEAR(box.min.z, 0.0, 1e-9);
  EXPECT_NEAR(box.extents().x, 300.0, 3.0);
  EXPECT_NEAR(box.extents().y, 500.0, 5.0);
  EXPECT_NEAR(box.extents().z, 200.0, 1e-9);
}

TEST(Builtin, HomeAndLateralGantryAreClear) {
  for (const auto& m : builtin_catalog(2.0)->machines) {
    Scene s(m);
    for (double g : {0.0, 90.0, -90.0, 180.0}) {
      MachineState st;
      st.gantry_deg = g;
      s.set_state(st);
      const auto reports = collision::scene_collision(s.placed());
      EXPECT_EQ(reports.size(), 2u);
      EXPECT_FALSE(collision::any_colliding(reports)) << m->id() << " gantry " << g;
    }
  }
}

TEST(Builtin, CouchRaisedIntoHeadCollides) {
  Scene s(builtin_catalog(2.0)->machine("varian_trilogy"));
  MachineState st;
  st.couch_vertical_mm = 500;
  s.set_state(st);
  const auto reports = collision::scene_collision(s.placed());
  EXPECT_TRUE(collision::any_colliding(reports));
  EXPECT_EQ(collision::highlighted_ids(reports), (std::vector<std::string>{"collimator", "couch"}));
}

// ---------------------------------------------------------------- files

TEST(MachineFile, RoundTripPreservesGeometry) {
  for (const auto& spec : {varian_trilogy_spec(), novalis_spec()}) {
    const auto text = machine_spec_to_json(spec).dump();
    const auto back = machine_spec_from_json(json::parse(text));
    const MachineDescription a(spec, 4.0);
    const MachineDescription b(back, 4.0);
    EXPECT_EQ(a.gantry()->mesh().vertices(), b.gantry()->mesh().vertices());
    EXPECT_EQ(a.couch_top()->mesh().triangles(), b.couch_top()->mesh().triangles());
    ASSERT_EQ(a.catalog().size(), b.catalog().size());
    for (std::size_t i = 0; i < a.catalog().size(); ++i) {
      EXPECT_EQ(a.catalog()[i].offset, b.catalog()[i].offset);
      EXPECT_EQ(a.catalog()[i].mesh->mesh().vertices(), b.catalog()[i].mesh->mesh().vertices());
    }
    EXPECT_EQ(a.limits(), b.limits());
  }
}

TEST(MachineFile, ExportThenLoadDirectory) {
  const auto dir = std::filesystem::temp_directory_path() / "ebrt_machines_test";
  std::filesystem::remove_all(dir);
  export_builtin(dir);
  const auto c = load_catalog(dir, 4.0);
  EXPECT_EQ(c->machines.size(), 2u);
  EXPECT_EQ(c->phantoms.size(), 1u);
  EXPECT_NO_THROW(c->machine("novalis"));
  EXPECT_NO_THROW(c->phantom_mesh("elliptical_phantom"));
  std::filesystem::remove_all(dir);
}

TEST(MachineFile, Rejections) {
  auto j = machine_spec_to_json(varian_trilogy_spec());
  auto bad_schema = j;
  bad_schema["schema"] = "ebrt-machine/99";
  EXPECT_THROW(machine_spec_from_json(bad_schema), ParseError);
  auto bad_limit = j;
  bad_limit["limits"]["gantry_deg"] = {10, -10};
  EXPECT_THROW(MachineDescription(machine_spec_from_json(bad_limit)), InvalidArgument);
  auto bad_sad = j;
  bad_sad["sad_mm"] = -1;
  EXPECT_THROW(MachineDescription(machine_spec_from_json(bad_sad)), InvalidArgument);
  auto bad_part = j;
  bad_part["components"]["gantry"][0]["shape"] = "torus";
  EXPECT_THROW(machine_spec_from_json(bad_part), ParseError);
  auto missing = j;
  missing["components"].erase("couch_top");
  EXPECT_THROW(machine_spec_from_json(missing), ParseError);
}

TEST(StateJson, PartialUpdateAndErrors) {
  MachineState base;
  base.collimator_deg = 10;
  const auto s = state_from_json(json{{"gantry_deg", 90}, {"field_mm", {50, 80}}}, base);
  EXPECT_EQ(s.gantry_deg, 90.0);
  EXPECT_EQ(s.collimator_deg, 10.0);
  EXPECT_EQ(s.field_y_mm, 80.0);
  EXPECT_EQ(state_from_json(state_to_json(s)), s);
  EXPECT_THROW(state_from_json(json{{"gantry", 90}}), ParseError);
  EXPECT_THROW(state_from_json(json{{"gantry_deg", "90"}}), ParseError);
  EXPECT_THROW(state_from_json(json::array()), ParseError);
}

}  // namespace
}  // namespace ebrt::linac
