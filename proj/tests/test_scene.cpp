#include "navfield/scene.hpp"

#include "support/support.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <filesystem>
#include <string>

using namespace navfield;
using namespace navfield::test;

namespace {

bool mentions(const std::vector<std::string>& msgs, const std::string& needle) {
  for (const std::string& m : msgs) {
    if (m.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::string error_of(const std::string& text) {
  try {
    parse_scene(text);
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

Obstacle rotated(const Obstacle& ob, const Mat3& R) {
  switch (ob.kind()) {
    case ObstacleKind::Sphere:
      return Obstacle::sphere(R * ob.center(), ob.radius());
    case ObstacleKind::FullCylinder:
      return Obstacle::full_cylinder(R * ob.axis_point(), R * ob.axis_dir(), ob.radius());
    case ObstacleKind::CappedCylinder:
      return Obstacle::capped_cylinder(R * ob.p1(), R * ob.p2(), ob.radius());
    default:
      return ob;
  }
}

Workspace rotated(const Workspace& ws, const Mat3& R) {
  Workspace out = ws;
  for (Shape& s : out.obstacles) {
    if (auto* ob = std::get_if<Obstacle>(&s)) {
      *ob = rotated(*ob, R);
    } else {
      const MergedObstacle& m = std::get<MergedObstacle>(s);
      std::vector<Obstacle> members;
      for (const Obstacle& o : m.members()) members.push_back(rotated(o, R));
      s = MergedObstacle(members, m.p());
    }
  }
  return out;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  return Eigen::AngleAxisd(uniform(rng, 0.0, 2.0 * M_PI), random_unit(rng)).toRotationMatrix();
}

const char* kMinimal = R"({"version": 1, "outer_radius": 4.0, "target": [0, 0, 1]})";

}  // namespace

TEST_CASE("minimal scene") {
  const Scene sc = parse_scene(kMinimal);
  CHECK(sc.workspace.obstacles.empty());
  CHECK(sc.workspace.outer_radius == 4.0);
  CHECK(sc.spec.target == Vec3(0, 0, 1));
  CHECK(sc.starts.empty());
}

TEST_CASE("obstacle kinds are preserved") {
  const Scene sc = parse_scene(R"({
    "version": 1, "outer_radius": 5, "target": [0, 0, 0], "k": 3, "potential": "phi",
    "obstacles": [
      {"type": "sphere", "center": [2, 0, 0], "radius": 0.5},
      {"type": "capped_cylinder", "p1": [-2, 1, 0], "p2": [-2, 1, 2], "radius": 0.3},
      {"type": "full_cylinder", "point": [0, -3, 0], "direction": [0, 0, 2], "radius": 0.2}
    ]})");
  REQUIRE(sc.workspace.obstacles.size() == 3);
  CHECK(std::get<Obstacle>(sc.workspace.obstacles[0]).kind() == ObstacleKind::Sphere);
  CHECK(std::get<Obstacle>(sc.workspace.obstacles[1]).kind() == ObstacleKind::CappedCylinder);
  CHECK(std::get<Obstacle>(sc.workspace.obstacles[2]).kind() == ObstacleKind::FullCylinder);
  CHECK(sc.spec.k == 3);
  CHECK(sc.spec.potential == Potential::Phi);
  // The direction was not unit length.
  CHECK(mentions(sc.warnings, "obstacles[2].direction"));
}

TEST_CASE("parse errors name the problem") {
  const std::string v = error_of(R"({"version": 2, "outer_radius": 4, "target": [0, 0, 0]})");
  CHECK(v.find("supported: 1") != std::string::npos);
  CHECK(error_of(R"({"version": 1, "outer_radius": 4, "target": [0, 0, 0], "colour": 1})").find("colour") !=
        std::string::npos);
  const std::string r = error_of(R"({"version": 1, "outer_radius": 4, "target": [0, 0, 0],
    "obstacles": [{"type": "sphere", "center": [1, 0, 0], "radius": 1}, {"type": "sphere", "center": [1, 0, 0], "radius": -1}]})");
  CHECK(r.find("obstacles[1].radius") != std::string::npos);
  CHECK(error_of(R"({"version": 1, "outer_radius": 4, "target": [0, 0]})").find("target") != std::string::npos);
  CHECK(error_of(R"({"version": 1, "outer_radius": 4, "target": [0, 0, 0], "k": 0})").find("k") != std::string::npos);
  CHECK(error_of(R"({"version": 1, "outer_radius": 4, "target": [0, 0, 0], "potential": "sigma"})")
            .find("potential") != std::string::npos);
  CHECK(error_of(R"({"version": 1, "outer_radius": 4, "target": [0, 0, 0], "obstacles": [{"type": "cube"}]})")
            .find("obstacles[0].type") != std::string::npos);
  const std::string syn = error_of("{\"version\": 1,\n  \"outer_radius\": ]");
  CHECK(syn.find("line 2") != std::string::npos);
  CHECK(!error_of(R"({"outer_radius": 4, "target": [0, 0, 0]})").empty());
  CHECK_THROWS_AS(load_scene("scenes/does_not_exist.json"), IoError);
}

TEST_CASE("joint declarations") {
  const Scene sc = parse_scene(R"({
    "version": 1, "outer_radius": 5, "target": [0, 0, -3],
    "obstacles": [
      {"type": "capped_cylinder", "p1": [0, 0, 0], "p2": [2, 0, 0], "radius": 0.2},
      {"type": "capped_cylinder", "p1": [0, 0, 0], "p2": [1, 1, 0], "radius": 0.2},
      {"type": "ball_joint", "center": [0, 0, 0], "radius": 0.8, "members": [0, 1]}
    ]})");
  REQUIRE(sc.workspace.joints.size() == 1);
  CHECK(sc.workspace.joints[0].sphere_index == 2);
  CHECK(validate(sc.workspace, sc.spec).valid());
  // The same pair without the joint meets at 45 degrees.
  Workspace bare = sc.workspace;
  bare.obstacles.pop_back();
  bare.joints.clear();
  const ValidationReport rep = validate(bare, sc.spec);
  CHECK_FALSE(rep.valid());
  REQUIRE(rep.pairs.size() == 1);
  CHECK(rep.pairs[0].relation == PairRelation::Forbidden);
  CHECK(error_of(R"({"version": 1, "outer_radius": 5, "target": [0, 0, -3], "obstacles": [
      {"type": "capped_cylinder", "p1": [0, 0, 0], "p2": [1, 0, 0], "radius": 0.2},
      {"type": "ball_joint", "center": [0, 0, 0], "radius": 0.5, "members": [0, 3]}]})")
            .find("obstacles[1].members[1]") != std::string::npos);
}

TEST_CASE("serialization round-trips bit for bit") {
  for (const auto& entry : std::filesystem::directory_iterator("scenes")) {
    CAPTURE(entry.path().string());
    const Scene a = load_scene(entry.path());
    const Scene b = parse_scene(serialize_scene(a));
    CHECK(a.workspace == b.workspace);
    CHECK(a.spec.target == b.spec.target);
    CHECK(a.spec.k == b.spec.k);
    CHECK(a.spec.potential == b.spec.potential);
    CHECK(a.sim.damping_c == b.sim.damping_c);
    CHECK(a.sim.t_max == b.sim.t_max);
    CHECK(a.sim.dt == b.sim.dt);
    CHECK(a.starts == b.starts);
    CHECK(a.name == b.name);
  }
  // Values that do not survive a short decimal form.
  Scene s = parse_scene(kMinimal);
  s.workspace.outer_radius = 1.0 / 3.0 + 10.0;
  s.spec.target = Vec3(std::nextafter(0.1, 1.0), -1e-300, M_PI);
  s.workspace.obstacles.emplace_back(Obstacle::sphere(Vec3(std::sqrt(2.0), 0, 0), 0.1 + 0.2));
  const Scene t = parse_scene(serialize_scene(s));
  CHECK(t.workspace == s.workspace);
  CHECK(t.spec.target == s.spec.target);
}

TEST_CASE("validation of the bundled scenes") {
  auto check = [](const char* path) {
    const Scene sc = load_scene(path);
    return validate(sc.workspace, sc.spec);
  };
  CHECK(check("scenes/two_spheres.json").valid());
  CHECK(check("scenes/empty.json").valid());
  CHECK(check("scenes/sphere_between.json").valid());
  CHECK(check("scenes/tetra.json").valid());
  CHECK(check("scenes/tripod.json").valid());
  CHECK(check("scenes/close_cylinders.json").valid());

  const ValidationReport tangent = check("scenes/tangent_spheres.json");
  CHECK_FALSE(tangent.valid());
  CHECK(mentions(tangent.messages, "obstacles 0 and 1"));
  REQUIRE(!tangent.pairs.empty());
  CHECK(tangent.pairs[0].relation == PairRelation::Tangent);

  const ValidationReport triple = check("scenes/triple_overlap.json");
  CHECK_FALSE(triple.valid());
  CHECK(triple.triple_intersection_found);
  for (const PairClassification& pc : triple.pairs) CHECK(pc.relation == PairRelation::AllowedIntersecting);
}

TEST_CASE("pair rules for cylinders") {
  NavSpec spec;
  spec.target = Vec3(0, 0, -3);
  auto pair = [&](const Obstacle& a, const Obstacle& b) {
    Workspace ws;
    ws.outer_radius = 5.0;
    ws.obstacles = {a, b};
    return validate(ws, spec);
  };
  const Obstacle x = Obstacle::capped_cylinder(Vec3(-2, 0, 0), Vec3(2, 0, 0), 0.3);
  // Perpendicular crossing of equal radii is allowed.
  const ValidationReport perp = pair(x, Obstacle::capped_cylinder(Vec3(0, -2, 0), Vec3(0, 2, 0), 0.3));
  CHECK(perp.valid());
  CHECK(perp.pairs[0].relation == PairRelation::AllowedIntersecting);
  // Unequal radii.
  CHECK_FALSE(pair(x, Obstacle::capped_cylinder(Vec3(0, -2, 0), Vec3(0, 2, 0), 0.4)).valid());
  // Axes that miss each other.
  CHECK_FALSE(pair(x, Obstacle::capped_cylinder(Vec3(0, -2, 0.2), Vec3(0, 2, 0.2), 0.3)).valid());
  // An oblique crossing.
  const ValidationReport ob = pair(x, Obstacle::capped_cylinder(Vec3(-1, -1, 0), Vec3(1, 1, 0), 0.3));
  CHECK_FALSE(ob.valid());
  CHECK(ob.pairs[0].relation == PairRelation::Forbidden);
  CHECK(ob.pairs[0].note.find("90 degrees") != std::string::npos);
  // An L corner: the rays are 90 degrees apart.
  CHECK(pair(x, Obstacle::capped_cylinder(Vec3(2, 0, 0), Vec3(2, 2, 0), 0.3)).valid());
  // Separated cylinders at any angle.
  const ValidationReport far = pair(x, Obstacle::capped_cylinder(Vec3(-1, -1, 1), Vec3(1, 1, 1), 0.3));
  CHECK(far.valid());
  CHECK(far.pairs[0].relation == PairRelation::Disjoint);
  CHECK(far.pairs[0].gap == doctest::Approx(0.4));
  // A sphere may cut a cylinder anywhere.
  CHECK(pair(x, Obstacle::sphere(Vec3(0.7, 0.2, 0.1), 0.5)).valid());
}

TEST_CASE("containment and target checks") {
  NavSpec spec;
  Workspace ws;
  ws.outer_radius = 5.0;
  ws.obstacles.emplace_back(Obstacle::sphere(Vec3(0, 0, 0), 1.0));
  ValidationReport rep = validate(ws, spec);
  CHECK_FALSE(rep.target_ok);
  CHECK_FALSE(rep.valid());
  spec.target = Vec3(0, 0, 3);
  CHECK(validate(ws, spec).valid());
  ws.obstacles.emplace_back(Obstacle::sphere(Vec3(0, 4, 0), 1.0));
  CHECK(mentions(validate(ws, spec).messages, "tangent to the workspace boundary"));
  ws.obstacles.back() = Obstacle::sphere(Vec3(0, 7, 0), 1.0);
  CHECK(mentions(validate(ws, spec).messages, "outside the workspace"));
  spec.target = Vec3(0, 0, 6);
  CHECK_FALSE(validate(ws, spec).target_ok);
}

TEST_CASE("separated random scenes are valid") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Scene sc = random_scene(seed);
    const ValidationReport rep = validate(sc.workspace, sc.spec);
    CHECK(rep.valid());
    CHECK_FALSE(rep.triple_intersection_found);
    for (const PairClassification& pc : rep.pairs) CHECK(pc.relation == PairRelation::Disjoint);
  }
}

TEST_CASE("validation is invariant under rotation") {
  std::mt19937_64 rng(17);
  const char* files[] = {"scenes/two_spheres.json", "scenes/tangent_spheres.json", "scenes/triple_overlap.json",
                         "scenes/tetra.json", "scenes/tripod.json", "scenes/close_cylinders.json"};
  for (const char* f : files) {
    CAPTURE(f);
    const Scene sc = load_scene(f);
    const ValidationReport ref = validate(sc.workspace, sc.spec);
    for (int t = 0; t < 3; ++t) {
      const Mat3 R = random_rotation(rng);
      NavSpec spec = sc.spec;
      spec.target = R * spec.target;
      const ValidationReport rep = validate(rotated(sc.workspace, R), spec);
      CHECK(rep.valid() == ref.valid());
      CHECK(rep.triple_intersection_found == ref.triple_intersection_found);
      REQUIRE(rep.pairs.size() == ref.pairs.size());
      for (std::size_t i = 0; i < rep.pairs.size(); ++i) CHECK(rep.pairs[i].relation == ref.pairs[i].relation);
    }
  }
}

TEST_CASE("merging intersecting groups") {
  NavSpec spec;
  spec.target = Vec3(0, 0, -3);
  Workspace ws;
  ws.outer_radius = 5.0;
  ws.obstacles.emplace_back(Obstacle::sphere(Vec3(0, 0, 0), 1.0));
  ws.obstacles.emplace_back(Obstacle::sphere(Vec3(3, 0, 2), 0.5));
  ws.obstacles.emplace_back(Obstacle::sphere(Vec3(1.2, 0, 0), 0.6));
  const ValidationReport rep = validate(ws, spec);
  REQUIRE(rep.valid());
  std::vector<std::size_t> map;
  const Workspace m = merge_intersecting(ws, rep, 2.0, &map);
  REQUIRE(m.obstacles.size() == 2);
  CHECK(map[0] == map[2]);
  CHECK(map[1] != map[0]);
  const auto& merged = std::get<MergedObstacle>(m.obstacles[map[0]]);
  CHECK(merged.members().size() == 2);
  CHECK(merged.members()[0] == std::get<Obstacle>(ws.obstacles[0]));
  CHECK(std::holds_alternative<Obstacle>(m.obstacles[map[1]]));
  const Workspace all = merge_all(ws);
  REQUIRE(all.obstacles.size() == 1);
  CHECK(std::get<MergedObstacle>(all.obstacles[0]).members().size() == 3);
}
