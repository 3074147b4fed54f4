#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "gelflow/fields.hpp"
#include "gelflow/io.hpp"
#include "gelflow/random.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace gelflow;
using testsupport::TempDir;

namespace {

std::vector<FieldNode> random_nodes(std::mt19937_64& rng, int n,
                                    double span = 10.0) {
  std::vector<FieldNode> nodes(n);
  for (auto& node : nodes) {
    node.position = Point3d(uniform(rng, 0, span), uniform(rng, 0, span),
                            uniform(rng, 0, span * 0.3));
    node.displacement = Vec3d(uniform(rng, -1, 1), uniform(rng, -1, 1),
                              uniform(rng, -1, 1));
  }
  return nodes;
}

}  // namespace

TEST_CASE("grid sampling tiles the layer with cell centers") {
  ParticleLayerSpec layer;
  const auto points = sample_grid(layer, 1.5);
  CHECK(points.size() == 20u * 20 * 3);
  for (const auto& p : points) {
    CHECK(p.x() > 0.0);
    CHECK(p.x() < 30.0);
    CHECK(p.y() > 0.0);
    CHECK(p.y() < 30.0);
    CHECK(p.z() > 0.0);
    CHECK(p.z() < 4.5);
  }
  CHECK((points.front() - Point3d(0.75, 0.75, 0.75)).norm() < 1e-12);

  ParticleLayerSpec unit;
  unit.extent = Vec3d(1, 1, 1);
  const auto single = sample_grid(unit, 1.0);
  REQUIRE(single.size() == 1u);
  CHECK((single[0] - Point3d(0.5, 0.5, 0.5)).norm() < 1e-12);

  const auto again = sample_grid(layer, 1.5);
  REQUIRE(again.size() == points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    CHECK((again[i] - points[i]).norm() == 0.0);

  CHECK_THROWS_AS(sample_grid(layer, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_grid(layer, 5.0), std::invalid_argument);  // > min extent
}

TEST_CASE("layer validation") {
  ParticleLayerSpec bad;
  bad.extent.z() = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = {};
  bad.volume_ratio = 1.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = {};
  bad.radius_max = bad.radius_min / 2;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("neighbor queries match a linear scan") {
  std::mt19937_64 rng(23);
  // Clustered cloud stresses shell termination more than uniform data.
  std::vector<FieldNode> nodes = random_nodes(rng, 400);
  for (int i = 0; i < 100; ++i) {
    FieldNode n;
    n.position = Point3d(2.0 + uniform(rng, -0.1, 0.1),
                         3.0 + uniform(rng, -0.1, 0.1),
                         1.0 + uniform(rng, -0.1, 0.1));
    n.displacement = Vec3d::Zero();
    nodes.push_back(n);
  }
  ScatteredField field(nodes);
  std::vector<Point3d> cloud;
  for (const auto& n : nodes) cloud.push_back(n.position);

  for (int t = 0; t < 200; ++t) {
    const Point3d q(uniform(rng, -2, 12), uniform(rng, -2, 12), uniform(rng, -1, 4));
    for (int k : {1, 4, 8}) {
      const auto got = field.nearest(q, k);
      const auto want = oracles::knn_linear(cloud, q, k);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
    }
  }
  CHECK_THROWS_AS(field.nearest(Point3d::Zero(), 0), std::invalid_argument);
  CHECK_THROWS_AS(field.nearest(Point3d::Zero(), 10000), std::invalid_argument);
  CHECK_THROWS_AS(ScatteredField(std::vector<FieldNode>{}), std::invalid_argument);
}

TEST_CASE("inverse-distance interpolation basics") {
  // A single node extends constantly.
  ScatteredField one({{Point3d(1, 1, 1), Vec3d(3, -2, 5)}});
  const auto v = idw_interpolate(one, {Point3d(9, 0, 0), Point3d(1, 1, 1)},
                                 {.power = 2, .k_neighbors = 1});
  CHECK((v[0] - Vec3d(3, -2, 5)).norm() < 1e-12);
  CHECK((v[1] - Vec3d(3, -2, 5)).norm() == 0.0);  // exact hit

  // Midpoint of two nodes averages them.
  ScatteredField two({{Point3d(0, 0, 0), Vec3d(1, 0, 0)},
                      {Point3d(2, 0, 0), Vec3d(0, 0, 0)}});
  const auto mid = idw_interpolate(two, {Point3d(1, 0, 0)},
                                   {.power = 2, .k_neighbors = 2});
  CHECK((mid[0] - Vec3d(0.5, 0, 0)).norm() < 1e-12);

  CHECK_THROWS_AS(idw_interpolate(two, {Point3d::Zero()}, {.power = 0.0}),
                  std::invalid_argument);
}

TEST_CASE("interpolation is a convex combination and is continuous") {
  std::mt19937_64 rng(29);
  ScatteredField field(random_nodes(rng, 300));
  double lo[3] = {1e9, 1e9, 1e9}, hi[3] = {-1e9, -1e9, -1e9};
  for (const auto& n : field.nodes())
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], n.displacement[a]);
      hi[a] = std::max(hi[a], n.displacement[a]);
    }
  for (int t = 0; t < 300; ++t) {
    const Point3d q(uniform(rng, 0, 10), uniform(rng, 0, 10), uniform(rng, 0, 3));
    const Vec3d v = idw_interpolate(field, {q})[0];
    for (int a = 0; a < 3; ++a) {
      CHECK(v[a] >= lo[a] - 1e-12);
      CHECK(v[a] <= hi[a] + 1e-12);
    }
    const Vec3d v2 = idw_interpolate(field, {q + Vec3d(1e-7, 0, 0)})[0];
    CHECK((v2 - v).norm() < 1e-4);
  }
}

TEST_CASE("half-space displacements follow the point-load solution") {
  ElasticHalfspace mat;
  HalfspaceContact contact;
  contact.center = Vec2d(15, 15);
  contact.normal_force = 1.0;
  contact.radius = 2.5;

  // On the load axis the vertical displacement decays exactly as 1/depth.
  const std::vector<Point3d> axis = {Point3d(15, 15, 2.5), Point3d(15, 15, 0.5)};
  const auto u = halfspace_field(contact, mat, axis, 4.5);  // depths 2 and 4 mm
  CHECK(u[0].z() < 0.0);  // presses toward -z
  CHECK(u[0].z() / u[1].z() == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(u[0].x() == 0.0);
  CHECK(u[0].y() == 0.0);

  // Linear in the load.
  HalfspaceContact twice = contact;
  twice.normal_force = 2.0;
  const std::vector<Point3d> probes = {Point3d(12, 17, 1.0), Point3d(20, 10, 3.0)};
  const auto u1 = halfspace_field(contact, mat, probes, 4.5);
  const auto u2 = halfspace_field(twice, mat, probes, 4.5);
  for (std::size_t i = 0; i < probes.size(); ++i)
    CHECK((u2[i] - 2.0 * u1[i]).norm() < 1e-12 * u2[i].norm() + 1e-15);

  // Surface material is drawn toward the contact.
  const auto us = halfspace_field(contact, mat, {Point3d(20, 15, 4.5)}, 4.5);
  CHECK(us[0].x() < 0.0);
  CHECK(us[0].y() == 0.0);

  HalfspaceContact zero = contact;
  zero.normal_force = 0.0;
  const auto uz = halfspace_field(zero, mat, probes, 4.5);
  CHECK(uz[0].norm() == 0.0);

  CHECK_THROWS_AS(halfspace_field(contact, mat, {Point3d(15, 15, 4.5)}, 4.5),
                  GeometryError);  // singular load point
  CHECK_THROWS_AS(halfspace_field(contact, mat, {Point3d(15, 15, 5.0)}, 4.5),
                  std::invalid_argument);  // above the surface

  ElasticHalfspace bad;
  bad.poisson = 0.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = {};
  bad.shear_modulus = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("field CSV round trip preserves nodes and box") {
  TempDir tmp;
  std::mt19937_64 rng(31);
  auto nodes = random_nodes(rng, 50);
  ScatteredField field(std::move(nodes), Point3d(-1, -1, -1), Point3d(11, 11, 4));
  const std::string path = tmp.file("field.csv");
  save_field(path, field);
  const ScatteredField back = load_field(path);
  REQUIRE(back.nodes().size() == field.nodes().size());
  for (std::size_t i = 0; i < back.nodes().size(); ++i) {
    CHECK((back.nodes()[i].position - field.nodes()[i].position).norm() == 0.0);
    CHECK((back.nodes()[i].displacement - field.nodes()[i].displacement).norm() ==
          0.0);
  }
  CHECK((back.box_lo() - field.box_lo()).norm() == 0.0);
  CHECK((back.box_hi() - field.box_hi()).norm() == 0.0);

  // Without the sidecar the box tightens to the data.
  std::filesystem::remove(path + ".json");
  const ScatteredField tight = load_field(path);
  Point3d lo = tight.nodes().front().position;
  for (const auto& n : tight.nodes()) lo = lo.cwiseMin(n.position);
  CHECK((tight.box_lo() - lo).norm() == 0.0);
}

TEST_CASE("field CSV rejects malformed input") {
  TempDir tmp;
  const auto write = [&](const std::string& name, const std::string& body) {
    write_file(tmp.file(name), body);
    return tmp.file(name);
  };
  CHECK_THROWS_WITH_AS(load_field(write("empty.csv", "")),
                       doctest::Contains("empty"), IoError);
  CHECK_THROWS_WITH_AS(load_field(write("hdr.csv", "x,y,z,dx,dy,dz\n")),
                       doctest::Contains("no nodes"), IoError);
  CHECK_THROWS_WITH_AS(load_field(write("cols.csv", "x,y,z,dx,dy,dz\n1,2,3\n")),
                       doctest::Contains("line 2"), IoError);
  CHECK_THROWS_AS(load_field(write("junk.csv", "x,y,z,dx,dy,dz\n1,2,3,4,five,6\n")),
                  IoError);
  CHECK_THROWS_WITH_AS(
      load_field(write("nan.csv", "x,y,z,dx,dy,dz\n1,2,3,4,nan,6\n")),
      doctest::Contains("non-finite"), IoError);
  CHECK_THROWS_WITH_AS(load_field(write("nohdr.csv", "1,2,3,4,5,6\n")),
                       doctest::Contains("header"), IoError);
}
