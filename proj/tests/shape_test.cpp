#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "sketchpart/errors.hpp"
#include "sketchpart/shape/mesh.hpp"
#include "sketchpart/shape/primitive.hpp"
#include "test_support.hpp"

using namespace sketchpart;
using namespace sketchpart::shape;

TEST(Encode, UnitBoxLayout) {
  PartPrimitive box{PartKind::box, Vec3::Zero(), Vec3::Ones(), 0.0};
  const std::vector<double> expected{1, 0, 0, 0, 0, 0, 1, 1, 1, 1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(encode_part(box, 20), expected);
}

TEST(Encode, NarrowLatentRejected) { EXPECT_THROW(encode_part(PartPrimitive{}, 15), ConfigError); }

TEST(Encode, RoundTripOnParameterGrid) {
  // 3 kinds x 5^3 centers x 3^3 extents x 8 yaws.
  const double centers[] = {-0.5, -0.25, 0.0, 0.25, 0.5};
  const double extents[] = {0.1, 0.3, 0.6};
  std::size_t checked = 0;
  for (int k = 0; k < 3; ++k)
    for (double cx : centers)
      for (double cy : centers)
        for (double cz : centers)
          for (double ex : extents)
            for (double ey : extents)
              for (double ez : extents)
                for (int y = 0; y < 8; ++y) {
                  PartPrimitive p{static_cast<PartKind>(k), {cx, cy, cz}, {ex, ey, ez}, -std::numbers::pi + y * std::numbers::pi / 4};
                  const auto back = decode_part(encode_part(p, 32));
                  ASSERT_EQ(back.kind, p.kind);
                  ASSERT_EQ(back.center, p.center);
                  ASSERT_EQ(back.half_extents, p.half_extents);
                  ASSERT_TRUE(same_primitive(back, p));
                  ++checked;
                }
  EXPECT_EQ(checked, 3u * 125u * 27u * 8u);
}

TEST(Encode, DistinctPrimitivesHaveDistinctRows) {
  const double centers[] = {-0.3, 0.0, 0.3};
  const double extents[] = {0.2, 0.5};
  std::set<std::vector<double>> rows;
  std::size_t count = 0;
  for (int k = 0; k < 3; ++k)
    for (double cx : centers)
      for (double cy : centers)
        for (double ex : extents)
          for (double ez : extents)
            for (int y = 0; y < 4; ++y) {
              PartPrimitive p{static_cast<PartKind>(k), {cx, cy, 0.1}, {ex, 0.3, ez}, y * 0.5};
              auto row = encode_part(p, 32);
              rows.insert(std::vector<double>(row.begin(), row.begin() + kLatentSemanticWidth));
              ++count;
            }
  EXPECT_EQ(rows.size(), count);
}

TEST(Decode, ArgmaxTiesAndClamps) {
  std::vector<double> row(16, 0.0);
  row[0] = 0.4;
  row[1] = 0.39;
  row[2] = 0.1;
  row[6] = -0.5;
  row[7] = 5.0;
  row[8] = 0.3;
  row[3] = 4.0;
  row[9] = 1.0;
  auto p = decode_part(row);
  EXPECT_EQ(p.kind, PartKind::box);
  EXPECT_EQ(p.half_extents.x(), kMinHalfExtent);
  EXPECT_EQ(p.half_extents.y(), kMaxHalfExtent);
  EXPECT_EQ(p.center.x(), kMaxCenter);
  row[0] = row[1] = row[2] = 0.2;
  EXPECT_EQ(decode_part(row).kind, PartKind::box);
  row[1] = 0.7;
  row[2] = 0.7;
  EXPECT_EQ(decode_part(row).kind, PartKind::cylinder);
}

TEST(Decode, NonFiniteRejected) {
  std::vector<double> row(16, 0.0);
  row[4] = std::nan("");
  EXPECT_THROW(decode_part(row), NumericError);
}

TEST(Sdf, BoxInteriorAndExterior) {
  const std::vector<PartPrimitive> box{{PartKind::box, Vec3::Zero(), Vec3::Ones(), 0.0}};
  EXPECT_DOUBLE_EQ(sdf(box, Vec3(0, 0, 0)), -1.0);
  EXPECT_DOUBLE_EQ(sdf(box, Vec3(2, 0, 0)), 1.0);
  EXPECT_THROW(sdf(std::vector<PartPrimitive>{}, Vec3::Zero()), ArgumentError);
}

TEST(Sdf, UnionIsMinimum) {
  const PartPrimitive a{PartKind::box, {-0.6, 0, 0}, {0.2, 0.2, 0.2}, 0.0};
  const PartPrimitive b{PartKind::box, {0.6, 0, 0}, {0.3, 0.3, 0.3}, 0.0};
  const std::vector<PartPrimitive> parts{a, b};
  const Vec3 q(0.65, 0.05, 0.0);
  const double expected = std::min(primitive_sdf(a, q), primitive_sdf(b, q));
  EXPECT_LT(sdf(parts, q), 0.0);
  EXPECT_EQ(sdf(parts, q), expected);
  EXPECT_EQ(sdf(parts, q), primitive_sdf(b, q));
}

TEST(Sdf, CylinderAndSphereValues) {
  const PartPrimitive cyl{PartKind::cylinder, Vec3::Zero(), {0.5, 1.0, 0.5}, 0.0};
  EXPECT_NEAR(primitive_sdf(cyl, Vec3(1.0, 0.0, 0.0)), 0.5, 1e-15);
  EXPECT_NEAR(primitive_sdf(cyl, Vec3(0.0, 1.5, 0.0)), 0.5, 1e-15);
  EXPECT_NEAR(primitive_sdf(cyl, Vec3(0.0, 0.0, 0.0)), -0.5, 1e-15);
  const PartPrimitive sphere{PartKind::ellipsoid, Vec3::Zero(), {0.5, 0.5, 0.5}, 0.0};
  EXPECT_NEAR(primitive_sdf(sphere, Vec3(1.0, 0.0, 0.0)), 0.5, 1e-15);
}

TEST(Sdf, LipschitzForBoxesAndCylinders) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    auto parts = testing_support::random_parts(rng, 4, false);
    for (int i = 0; i < 500; ++i) {
      const Vec3 p(u(rng), u(rng), u(rng)), q(u(rng), u(rng), u(rng));
      EXPECT_LE(std::abs(sdf(parts, p) - sdf(parts, q)), (p - q).norm() + 1e-9);
    }
  }
}

TEST(Responsibility, InsideAndTies) {
  const std::vector<PartPrimitive> parts{
      {PartKind::box, {-0.5, 0, 0}, {0.2, 0.2, 0.2}, 0.0},
      {PartKind::box, {0.0, 0.7, 0}, {0.1, 0.1, 0.1}, 0.0},
      {PartKind::box, {0.5, 0, 0}, {0.2, 0.2, 0.2}, 0.0},
  };
  EXPECT_EQ(part_responsibility(parts, Vec3(0.5, 0.0, 0.0)), 2u);
  // Equidistant from parts 0 and 2.
  EXPECT_EQ(part_responsibility(parts, Vec3(0.0, 0.0, 0.0)), 0u);
}

TEST(Responsibility, MatchesBruteForce) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.25, 1.25);
  auto parts = testing_support::random_parts(rng, 6, true);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 q(u(rng), u(rng), u(rng));
    std::size_t best = 0;
    for (std::size_t k = 1; k < parts.size(); ++k)
      if (primitive_sdf(parts[k], q) < primitive_sdf(parts[best], q)) best = k;
    ASSERT_EQ(part_responsibility(parts, q), best);
  }
}

TEST(Mesh, SphereIsWatertightAndClose) {
  const std::vector<PartPrimitive> sphere{{PartKind::ellipsoid, Vec3::Zero(), {0.5, 0.5, 0.5}, 0.0}};
  const auto mesh = extract_mesh(sphere, {32});
  ASSERT_FALSE(mesh.empty());
  EXPECT_TRUE(edge_report(mesh).watertight());
  EXPECT_EQ(edge_report(mesh).degenerate_faces, 0u);
  const double bound = 2.0 * (2.5 / 32.0) * std::sqrt(3.0);
  for (const auto& v : mesh.vertices) EXPECT_LT(std::abs(sdf(sphere, v)), bound);
  EXPECT_EQ(mesh.face_part.size(), mesh.faces.size());
}

TEST(Mesh, NoCrossingGivesEmptyMesh) {
  // Part outside a shrunken domain: the field is positive everywhere.
  const std::vector<PartPrimitive> far{{PartKind::box, {1.0, 1.0, 1.0}, {0.1, 0.1, 0.1}, 0.0}};
  MeshOptions opt;
  opt.grid_res = 16;
  opt.domain_half = 0.5;
  EXPECT_TRUE(extract_mesh(far, opt).empty());
}

TEST(Mesh, ChairFacesCoverAllParts) {
  const std::vector<PartPrimitive> chair{
      {PartKind::box, {0, 0, 0}, {0.5, 0.05, 0.5}, 0.0},     {PartKind::box, {-0.4, -0.45, -0.4}, {0.05, 0.4, 0.05}, 0.0},
      {PartKind::box, {0.4, -0.45, -0.4}, {0.05, 0.4, 0.05}, 0.0}, {PartKind::box, {-0.4, -0.45, 0.4}, {0.05, 0.4, 0.05}, 0.0},
      {PartKind::box, {0.4, -0.45, 0.4}, {0.05, 0.4, 0.05}, 0.0},
  };
  const auto mesh = extract_mesh(chair, {48});
  std::set<std::uint32_t> labels(mesh.face_part.begin(), mesh.face_part.end());
  EXPECT_GE(labels.size(), 5u);
  for (std::size_t f = 0; f < mesh.faces.size(); f += 37) {
    EXPECT_EQ(mesh.face_part[f], part_responsibility(chair, mesh.centroid(f)));
  }
}

TEST(Mesh, RandomUnionsWatertight) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    auto parts = testing_support::random_parts(rng, 5, true);
    const auto mesh = extract_mesh(parts, {32});
    const auto rep = edge_report(mesh);
    EXPECT_TRUE(rep.watertight()) << "trial " << trial;
    EXPECT_EQ(rep.degenerate_faces, 0u);
    const double bound = 2.0 * (2.5 / 32.0) * std::sqrt(3.0);
    for (const auto& v : mesh.vertices) ASSERT_LE(std::abs(sdf(parts, v)), bound);
  }
}

TEST(Mesh, GridTooSmall) {
  const std::vector<PartPrimitive> p{{PartKind::box, Vec3::Zero(), {0.5, 0.5, 0.5}, 0.0}};
  EXPECT_THROW(extract_mesh(p, {4}), ArgumentError);
}

namespace {

LabeledMesh two_triangles() {
  // Areas 1 and 3 (right triangles with legs (sqrt2, sqrt2) and (sqrt6, sqrt6)).
  LabeledMesh m;
  const double a = std::sqrt(2.0), b = std::sqrt(6.0);
  m.vertices = {{0, 0, 0}, {a, 0, 0}, {0, a, 0}, {0, 0, 1}, {b, 0, 1}, {0, b, 1}};
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  m.face_part = {0, 1};
  return m;
}

}  // namespace

TEST(Sample, PointsInsideSingleTriangle) {
  LabeledMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  m.face_part = {0};
  for (const auto& p : sample_surface(m, 1000, 3)) {
    EXPECT_GE(p.x(), -1e-12);
    EXPECT_GE(p.y(), -1e-12);
    EXPECT_LE(p.x() + p.y(), 1.0 + 1e-12);
    EXPECT_NEAR(p.z(), 0.0, 1e-9);
  }
}

TEST(Sample, AreaWeighted) {
  const auto m = two_triangles();
  EXPECT_NEAR(m.face_area(0), 1.0, 1e-12);
  EXPECT_NEAR(m.face_area(1), 3.0, 1e-12);
  const auto pts = sample_surface(m, 40000, 11);
  std::size_t on_first = 0;
  for (const auto& p : pts) on_first += p.z() < 0.5;
  EXPECT_NEAR(static_cast<double>(on_first), 10000.0, 200.0);
  EXPECT_NEAR(static_cast<double>(pts.size() - on_first), 30000.0, 600.0);
}

TEST(Sample, DeterministicAndValidated) {
  const auto m = two_triangles();
  EXPECT_EQ(sample_surface(m, 500, 9), sample_surface(m, 500, 9));
  EXPECT_NE(sample_surface(m, 500, 9), sample_surface(m, 500, 10));
  EXPECT_THROW(sample_surface(LabeledMesh{}, 10, 1), ArgumentError);
  EXPECT_THROW(sample_surface(m, 0, 1), ArgumentError);
}

TEST(MeshIo, ObjAndJsonRoundTrip) {
  const std::vector<PartPrimitive> parts{{PartKind::box, {0.3, 0, 0}, {0.2, 0.3, 0.2}, 0.0},
                                         {PartKind::cylinder, {-0.3, 0, 0}, {0.2, 0.4, 0.2}, 0.0}};
  const auto mesh = extract_mesh(parts, {16});
  const auto from_json = mesh_from_json(mesh_to_json(mesh));
  EXPECT_EQ(from_json.vertices, mesh.vertices);
  EXPECT_EQ(from_json.faces, mesh.faces);
  EXPECT_EQ(from_json.face_part, mesh.face_part);
  const auto obj = to_obj(mesh);
  EXPECT_NE(obj.find("g part_1"), std::string::npos);
  const auto from_obj = parse_obj(obj);
  EXPECT_EQ(from_obj.faces.size(), mesh.faces.size());
  std::map<std::uint32_t, std::size_t> a, b;
  for (auto p : mesh.face_part) ++a[p];
  for (auto p : from_obj.face_part) ++b[p];
  EXPECT_EQ(a, b);
  EXPECT_THROW(parse_obj("v 1 2\n"), ParseError);
}

TEST(PartSetTest, GroundTruthConstruction) {
  const std::vector<PartPrimitive> parts{{PartKind::box, {0.1, 0, 0}, {0.2, 0.3, 0.2}, 0.0},
                                         {PartKind::ellipsoid, {-0.3, 0.2, 0}, {0.2, 0.1, 0.2}, 0.5}};
  const std::vector<std::size_t> slots{3, 0};
  const auto set = make_part_set(parts, slots, 5, 32);
  EXPECT_EQ(set.c, (std::vector<double>{1, 0, 0, 1, 0}));
  for (std::size_t i : {1u, 2u, 4u})
    for (double v : set.row(i)) EXPECT_EQ(v, 0.0);
  std::vector<std::size_t> got_slots;
  const auto decoded = decode_present(set, 0.5, &got_slots);
  ASSERT_EQ(decoded.size(), 2u);
  EXPECT_EQ(got_slots, (std::vector<std::size_t>{0, 3}));
  EXPECT_TRUE(same_primitive(decoded[0], parts[1]));
  EXPECT_TRUE(same_primitive(decoded[1], parts[0]));
}
