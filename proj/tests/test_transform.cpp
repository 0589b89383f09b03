#include "navfield/transform.hpp"

#include "support/support.hpp"

#include <doctest.h>

using namespace navfield;
using namespace navfield::test;

namespace {

constexpr double kDeg = M_PI / 180.0;

// An L corner of two capped cylinders with a ball joint at the corner.
Workspace corner(double r0, double angle) {
  Workspace ws;
  ws.outer_radius = r0;
  const Vec3 c(0.5, 0.5, 0.0);
  ws.obstacles.emplace_back(Obstacle::capped_cylinder(c, c + Vec3(2, 0, 0), 0.2));
  ws.obstacles.emplace_back(
      Obstacle::capped_cylinder(c, c + 2.0 * Vec3(std::cos(angle), std::sin(angle), 0), 0.2));
  ws.obstacles.emplace_back(Obstacle::sphere(c, 0.5));
  ws.joints.push_back(JointDecl{2, {0, 1}});
  return ws;
}

double radius_of(const Workspace& ws, std::size_t i) { return std::get<Obstacle>(ws.obstacles[i]).radius(); }

}  // namespace

TEST_CASE("expansion factors") {
  const double full90 = joint_expansion_factor(M_PI / 2, ExpansionMode::FullEnclosure);
  CHECK(full90 == doctest::Approx(std::sqrt(2.0)));
  CHECK(full90 - 1.0 == doctest::Approx(0.414).epsilon(1e-3));
  CHECK(joint_expansion_factor(M_PI / 2, ExpansionMode::MinimalEvolute) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(joint_expansion_factor(60 * kDeg, ExpansionMode::FullEnclosure) == doctest::Approx(2.0));
  CHECK(joint_expansion_factor(109.47 * kDeg, ExpansionMode::MinimalEvolute) < 1.0);
  CHECK(joint_expansion_factor(M_PI, ExpansionMode::FullEnclosure) == 1.0);
  CHECK(joint_expansion_factor(M_PI, ExpansionMode::MinimalEvolute) == 1.0);
  CHECK_THROWS_AS(joint_expansion_factor(0.0, ExpansionMode::FullEnclosure), InputError);
  CHECK_THROWS_AS(joint_expansion_factor(3.5, ExpansionMode::MinimalEvolute), InputError);
  for (int d = 1; d < 180; ++d) {
    CHECK(joint_expansion_factor(d * kDeg, ExpansionMode::MinimalEvolute) ==
          doctest::Approx(h_prime(d * kDeg)).epsilon(1e-13));
  }
  CHECK(expansion_mode_from_string("full") == ExpansionMode::FullEnclosure);
  CHECK(expansion_mode_from_string("minimal") == ExpansionMode::MinimalEvolute);
  CHECK_THROWS_AS(expansion_mode_from_string("max"), InputError);
}

TEST_CASE("full enclosure never undercuts the minimal radius") {
  for (int i = 1; i <= 900; ++i) {
    const double theta = i * 0.1 * kDeg;
    const double full = joint_expansion_factor(theta, ExpansionMode::FullEnclosure);
    const double minimal = joint_expansion_factor(theta, ExpansionMode::MinimalEvolute);
    CHECK(full >= minimal);
    if (i < 900) CHECK(full > minimal);
  }
}

TEST_CASE("evolute identities") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const double theta = uniform(rng, 1.0, 179.0) * kDeg;
    const double h = 1.0 / std::sin(0.5 * theta);
    const double hm = (h - 1) * (h + 1);
    const double x = (2 * h * h - 1) / (hm * (h * h + 1));
    const double s2 = std::pow(std::sin(0.5 * theta), 2);
    // Relative to the largest term; they grow like h^4 / (h^2 - 1)^2 near 180 degrees.
    const double scale = std::max({(std::pow(h, 4) - 1) * x * x * x, 3 * x * x, 3 * x, 1.0,
                                   std::pow(h, 4) / std::pow(h * h - 1, 2)});
    CHECK(std::abs(evolute_cubic(h, x)) <= 1e-12 * scale);
    // The sine form of x.
    CHECK(x == doctest::Approx(s2 * (2 - s2) / (1 - s2 * s2)).epsilon(1e-9));
    // |tau(phi_k)| against (r + R) h'.
    const double b = uniform(rng, 0.1, 2.0);
    const double rad = evolute_joint_radius(theta, b);
    CHECK(std::abs(rad - b * h_prime(theta)) <= 1e-10 * b * h_prime(theta));
    const auto phi = evolute_containment_angle(theta);
    CHECK(phi.has_value() == (theta <= M_PI / 2 + 1e-15));
    if (phi) CHECK(*phi == doctest::Approx(std::asin(std::sqrt(x))));
  }
  // Stable near the circle limit, where h' tends to 1/sqrt(2).
  CHECK(evolute_joint_radius(179.9 * kDeg, 1.0) == doctest::Approx(h_prime(179.9 * kDeg)).epsilon(1e-10));
  CHECK(evolute_joint_radius(179.9 * kDeg, 1.0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-5));
  CHECK(evolute_joint_radius(M_PI, 1.0) == 1.0);
  CHECK(*evolute_containment_angle(M_PI) == 0.0);
}

TEST_CASE("plain expansion") {
  Workspace ws;
  ws.outer_radius = 5.0;
  ws.obstacles.emplace_back(Obstacle::sphere(Vec3(1, 0, 0), 1.0));
  ws.obstacles.emplace_back(Obstacle::capped_cylinder(Vec3(-2, -1, 0), Vec3(-2, 1, 0), 0.3));
  const TransformResult r = transform(ws, 0.25, ExpansionMode::MinimalEvolute);
  CHECK(r.valid());
  CHECK(r.point_workspace.outer_radius == 4.75);
  CHECK(radius_of(r.point_workspace, 0) == 1.25);
  CHECK(radius_of(r.point_workspace, 1) == doctest::Approx(0.55));
  CHECK(std::get<Obstacle>(r.point_workspace.obstacles[0]).center() == Vec3(1, 0, 0));
  CHECK(r.p_fail_surface == 0.0);
  CHECK(r.p_fail_volume == 0.0);

  const TransformResult id = transform(ws, 0.0, ExpansionMode::FullEnclosure);
  CHECK(id.point_workspace == ws);
  CHECK(id.p_fail_surface == 0.0);
  CHECK(id.p_fail_volume == 0.0);

  CHECK_THROWS_AS(transform(ws, -0.1, ExpansionMode::FullEnclosure), InputError);
  CHECK_THROWS_AS(transform(ws, 5.0, ExpansionMode::FullEnclosure), InputError);
}

TEST_CASE("ball joints") {
  const Workspace ws = corner(6.0, M_PI / 2);
  const std::vector<BallJoint> joints = ball_joints(ws);
  REQUIRE(joints.size() == 1);
  CHECK(joints[0].theta == doctest::Approx(M_PI / 2));
  CHECK(joints[0].radius == 0.5);

  const double R = 0.1;
  const TransformResult full = transform(ws, R, ExpansionMode::FullEnclosure);
  REQUIRE(full.joints.size() == 1);
  CHECK(full.joints[0].factor == doctest::Approx(std::sqrt(2.0)));
  CHECK(radius_of(full.point_workspace, 2) == doctest::Approx(0.5 + std::sqrt(2.0) * R));
  CHECK(full.p_fail_volume > 0.0);
  CHECK(full.p_fail_surface > 0.0);
  CHECK(full.p_fail_surface <= 1.0);

  // h = 1: the joint grows like any other obstacle and adds no volume.
  const TransformResult minimal = transform(ws, R, ExpansionMode::MinimalEvolute);
  CHECK(radius_of(minimal.point_workspace, 2) == doctest::Approx(0.5 + R));
  CHECK(minimal.p_fail_volume == doctest::Approx(0.0).epsilon(1e-12));

  // A 60 degree corner doubles the offset under full enclosure.
  const TransformResult sharp = transform(corner(6.0, M_PI / 3), R, ExpansionMode::FullEnclosure);
  CHECK(sharp.joints[0].factor == doctest::Approx(2.0));

  // Malformed declarations.
  Workspace bad = ws;
  bad.joints[0].members = {0};
  CHECK_THROWS_AS(ball_joints(bad), InputError);
  bad = ws;
  bad.obstacles[1] = Obstacle::capped_cylinder(Vec3(0.9, 0.9, 0), Vec3(0.9, 3, 0), 0.2);
  CHECK_THROWS_AS(ball_joints(bad), InputError);
}

TEST_CASE("failure bounds shrink in a larger room") {
  double last_s = 2.0, last_v = 2.0;
  for (double r0 : {4.0, 6.0, 9.0, 14.0}) {
    const TransformResult r = transform(corner(r0, M_PI / 2), 0.1, ExpansionMode::FullEnclosure);
    const FailureProbabilities p = failure_probabilities(r, 20000, 50000, 3);
    CHECK(p.surface < last_s);
    CHECK(p.volume < last_v);
    CHECK(p.surface >= 0.0);
    CHECK(p.volume >= 0.0);
    last_s = p.surface;
    last_v = p.volume;
  }
}

TEST_CASE("failure bound estimators") {
  const TransformResult r = transform(corner(6.0, M_PI / 2), 0.1, ExpansionMode::FullEnclosure);
  const FailureProbabilities p = failure_probabilities(r, 20000, 50000, 1);
  // S is the shrunken wall; nothing touches it here.
  CHECK(p.surface_area == doctest::Approx(4.0 * M_PI * 5.9 * 5.9).epsilon(1e-9));
  const double rj = 0.5 + std::sqrt(2.0) * 0.1;
  CHECK(p.surface == doctest::Approx(4.0 * M_PI * rj * rj / p.surface_area));
  // V against the room volume minus an upper bound on the obstacles.
  const double room = 4.0 / 3.0 * M_PI * std::pow(5.9, 3);
  CHECK(p.free_volume < room);
  CHECK(p.free_volume > room - 4.0 / 3.0 * M_PI * std::pow(0.6, 3) - 2 * M_PI * 0.09 * 2.0);
  CHECK(p.volume == doctest::Approx(4.0 / 3.0 * M_PI * (std::pow(rj, 3) - std::pow(0.6, 3)) / p.free_volume));
  // Deterministic for a seed.
  const FailureProbabilities q = failure_probabilities(r, 20000, 50000, 1);
  CHECK(p.volume == q.volume);
  CHECK(p.surface == q.surface);
}

TEST_CASE("clearance rules") {
  Workspace ws;
  ws.outer_radius = 5.0;
  ws.obstacles.emplace_back(Obstacle::capped_cylinder(Vec3(-2, 0, 0), Vec3(2, 0, 0), 0.2));
  ws.obstacles.emplace_back(Obstacle::capped_cylinder(Vec3(-2, 0, 0.7), Vec3(2, 0, 0.7), 0.2));
  // Gap 0.3: fine below R = 0.15, violated above.
  CHECK(transform(ws, 0.1, ExpansionMode::MinimalEvolute).valid());
  const TransformResult r = transform(ws, 0.2, ExpansionMode::MinimalEvolute);
  CHECK_FALSE(r.valid());
  bool named = false;
  for (const std::string& v : r.violations) named = named || v.find("0 and 1") != std::string::npos;
  CHECK(named);

  // Three pairwise close obstacles form a cluster.
  Workspace cl;
  cl.outer_radius = 5.0;
  cl.obstacles.emplace_back(Obstacle::sphere(Vec3(0, 0, 0), 0.5));
  cl.obstacles.emplace_back(Obstacle::sphere(Vec3(1.1, 0, 0), 0.5));
  cl.obstacles.emplace_back(Obstacle::sphere(Vec3(0.55, 0.95, 0), 0.5));
  const TransformResult c = transform(cl, 0.08, ExpansionMode::MinimalEvolute);
  CHECK_FALSE(c.valid());
}

TEST_CASE("starts swallowed by the expansion are reported") {
  Workspace ws;
  ws.outer_radius = 5.0;
  ws.obstacles.emplace_back(Obstacle::sphere(Vec3(0, 0, 0), 1.0));
  TransformOptions o;
  o.starts = {Vec3(1.1, 0, 0), Vec3(3, 0, 0)};
  const TransformResult r = transform(ws, 0.2, ExpansionMode::MinimalEvolute, {}, o);
  bool flagged = false;
  for (const std::string& s : r.violations) flagged = flagged || s.find("start 0") != std::string::npos;
  for (const std::string& s : r.warnings) flagged = flagged || s.find("start 0") != std::string::npos;
  CHECK(flagged);
}
