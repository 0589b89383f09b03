#include "navfield/analysis.hpp"
#include "navfield/field.hpp"
#include "navfield/scene.hpp"

#include "support/support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

using namespace navfield;
using namespace navfield::test;

namespace {

Workspace room(double r0) {
  Workspace ws;
  ws.outer_radius = r0;
  return ws;
}

const Potential kAll[] = {Potential::BaseFhat, Potential::Phi, Potential::Psi};

}  // namespace

TEST_CASE("attractive term") {
  NavSpec spec;
  spec.target = Vec3(1, -2, 0.5);
  CHECK(gamma_d(spec, spec.target) == 0.0);
  CHECK(gamma_grad(spec, spec.target).norm() == 0.0);
  spec.target = Vec3::Zero();
  CHECK(gamma_d(spec, Vec3(1, 2, 2)) == doctest::Approx(9.0));
  CHECK((gamma_grad(spec, Vec3(1, 2, 2)) - Vec3(2, 4, 4)).norm() < 1e-15);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vec3 x = random_in_ball(rng, 10.0);
    CHECK(gamma_grad(spec, x).norm() == doctest::Approx(2.0 * std::sqrt(gamma_d(spec, x))));
  }
}

TEST_CASE("obstacle product") {
  CHECK(beta_product(room(5.0), Vec3::Zero()).total == doctest::Approx(25.0));

  Workspace ws = room(5.0);
  ws.obstacles.emplace_back(Obstacle::sphere(Vec3(2, 0, 0), 1.0));
  ws.obstacles.emplace_back(Obstacle::sphere(Vec3(-2, 0, 0), 1.0));
  CHECK(beta_product(ws, Vec3(3, 0, 0)).total == 0.0);
  const Vec3 x(0.3, 1.1, -0.4);
  const BetaProduct bp = beta_product(ws, x);
  REQUIRE(bp.factors.size() == 3);
  CHECK(bp.factors[0] * bp.factors[1] * bp.factors[2] == doctest::Approx(bp.total).epsilon(1e-15));

  // One vanishing factor leaves one term.
  const Vec3 s(2, 1, 0);
  const BetaProduct at = beta_product(ws, s);
  const Vec3 expect = beta_grad(Obstacle::sphere(Vec3(2, 0, 0), 1.0), s) * at.factors[0] * at.factors[2];
  CHECK((beta_product_grad(ws, s) - expect).norm() < 1e-12 * expect.norm());

  // Mirror symmetry about x = 0: no x component on the mid-plane.
  CHECK(std::abs(beta_product_grad(ws, Vec3(0, 1.3, 0.7)).x()) < 1e-12);

  Workspace one = room(4.0);
  one.obstacles.emplace_back(Obstacle::capped_cylinder(Vec3(-1, 1, 0), Vec3(1, 1, 0.5), 0.4));
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Vec3 y = random_free_point(rng, one, 0.05);
    auto f = [&](const Vec3& z) { return beta_product(one, z).total; };
    CHECK(rel_err(beta_product_grad(one, y), fd_grad(f, y), 1e-6) < 1e-5);
  }
}

TEST_CASE("values at the target and on obstacles") {
  Workspace ws = room(5.0);
  ws.obstacles.emplace_back(Obstacle::sphere(Vec3(2, 0, 0), 1.0));
  NavSpec spec;
  spec.k = 3;
  for (Potential p : kAll) {
    spec.potential = p;
    const FieldPoint fp = potential(spec, ws, spec.target);
    CHECK(fp.value == 0.0);
    CHECK(fp.gradient.norm() == 0.0);
  }
  spec.potential = Potential::Psi;
  CHECK(potential(spec, ws, Vec3(3, 0, 0)).value == 1.0);
  CHECK(potential(spec, ws, Vec3(0, 0, 5)).value == 1.0);
  spec.potential = Potential::Phi;
  CHECK(potential(spec, ws, Vec3(2, 1, 0)).value == 1.0);
  spec.potential = Potential::BaseFhat;
  CHECK_THROWS_AS(potential(spec, ws, Vec3(3, 0, 0)), DomainError);
  for (Potential p : kAll) {
    spec.potential = p;
    CHECK_THROWS_AS(potential(spec, ws, Vec3(2, 0.1, 0)), DomainError);
    CHECK_THROWS_AS(potential(spec, ws, Vec3(0, 0, 5.5)), DomainError);
  }
}

TEST_CASE("large-k limits") {
  Workspace ws = room(10.0);
  ws.obstacles.emplace_back(Obstacle::sphere(Vec3(3, 3, 0), 1.0));
  NavSpec spec;
  spec.k = 200;
  std::mt19937_64 rng(7);
  int n = 0;
  while (n < 200) {
    const Vec3 x = random_free_point(rng, ws, 0.1);
    const double g = gamma_d(spec, x);
    if (g <= 1.0) continue;
    spec.potential = Potential::Psi;
    CHECK(std::abs(potential(spec, ws, x).value - g / (g + 1.0)) <= 1e-2);
    spec.potential = Potential::Phi;
    CHECK(std::abs(potential(spec, ws, x).value - 1.0) <= 1e-2);
    ++n;
  }
}

TEST_CASE("range and per-obstacle factors") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Scene sc = random_scene(seed);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 200; ++i) {
      const Vec3 x = random_free_point(rng, sc.workspace, 1e-3);
      for (Potential p : {Potential::Phi, Potential::Psi}) {
        sc.spec.potential = p;
        const FieldEval e = eval(sc.spec, sc.workspace, x);
        CHECK(e.value >= 0.0);
        CHECK(e.value <= 1.0);
        CHECK(e.value > 0.0);
        REQUIRE(e.per_obstacle_beta.size() == sc.workspace.obstacles.size() + 1);
        CHECK(e.per_obstacle_beta[0] == beta(sc.workspace.boundary(), x));
        for (std::size_t k = 0; k < sc.workspace.obstacles.size(); ++k) {
          CHECK(e.per_obstacle_beta[k + 1] == shape_beta(sc.workspace.obstacles[k], x));
        }
      }
    }
  }
}

TEST_CASE("gradients and hessians match finite differences") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    Scene sc = random_scene(100 + seed);
    const double r0 = sc.workspace.outer_radius;
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 60; ++i) {
      const Vec3 x = random_free_point(rng, sc.workspace, 0.01 * r0);
      bool glue = false;
      for (const Shape& s : sc.workspace.obstacles) {
        const auto& ob = std::get<Obstacle>(s);
        if (ob.kind() == ObstacleKind::CappedCylinder && gluing_plane_distance(ob, x) < 1e-3 * r0) glue = true;
      }
      for (Potential p : kAll) {
        sc.spec.potential = p;
        auto f = [&](const Vec3& y) { return potential(sc.spec, sc.workspace, y).value; };
        auto g = [&](const Vec3& y) { return potential(sc.spec, sc.workspace, y).gradient; };
        const FieldPoint fp = potential(sc.spec, sc.workspace, x);
        // Phi sits near 1 over most of the room, so a small step drowns in
        // cancellation; the fields are smooth on this scale.
        const double h = 1e-5;
        const double gfloor = 1e-4 * std::abs(fp.value) / r0;
        CHECK(rel_err(fp.gradient, fd_grad(f, x, h), gfloor) <= 1e-5);
        if (!glue) {
          const double hfloor = 1e-4 * (fp.gradient.norm() / r0 + std::abs(fp.value) / (r0 * r0));
          CHECK(rel_err(potential_hessian(sc.spec, sc.workspace, x), fd_hess(g, x, h), hfloor) <= 1e-4);
        }
      }
    }
  }
}

TEST_CASE("hessian at the target is positive definite") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Scene sc = random_scene(seed);
    for (Potential p : kAll) {
      sc.spec.potential = p;
      // gamma^k / beta is flat to order 2k at the target; only k = 1 is PD.
      if (p == Potential::BaseFhat) sc.spec.k = 1;
      const Mat3 H = hessian_at_critical(sc.spec, sc.workspace, sc.spec.target, default_grad_tol(sc.workspace));
      Eigen::SelfAdjointEigenSolver<Mat3> es(H);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
  }
  // No obstacles and p_d at the center: a multiple of the identity.
  Workspace ws = room(3.0);
  NavSpec spec;
  spec.k = 2;
  for (Potential p : {Potential::Phi, Potential::Psi}) {
    spec.potential = p;
    const Mat3 H = hessian_at_critical(spec, ws, Vec3::Zero(), default_grad_tol(ws));
    CHECK(H(0, 0) > 0.0);
    CHECK((H - H(0, 0) * Mat3::Identity()).norm() < 1e-12 * H(0, 0));
  }
}

TEST_CASE("hessian at critical points agrees with finite differences") {
  const Scene sc = load_scene("scenes/sphere_between.json");
  CriticalSearchOptions opts;
  opts.n_starts = 100;
  const CriticalPointReport rep = find_critical_points(sc.spec, sc.workspace, opts);
  REQUIRE(rep.points.size() >= 2);
  for (Potential p : kAll) {
    NavSpec spec = sc.spec;
    spec.potential = p;
    for (const CriticalPoint& cp : rep.points) {
      const FieldPoint fp = potential(spec, sc.workspace, cp.x);
      // Same critical set for all three potentials.
      CHECK(fp.gradient.norm() <= 1e-7 * (1.0 + std::abs(fp.value)));
      if (cp.region.kind == Region::Target) continue;
      auto g = [&](const Vec3& y) { return potential(spec, sc.workspace, y).gradient; };
      const Mat3 H = hessian_at_critical(spec, sc.workspace, cp.x, 1e-6);
      CHECK(rel_err(H, fd_hess(g, cp.x), 0.0) <= 1e-3);
    }
  }
  NavSpec spec = sc.spec;
  CHECK_THROWS_AS(hessian_at_critical(spec, sc.workspace, Vec3(-2, 1, 0), 1e-12), DomainError);
}

TEST_CASE("navigation spec checks") {
  Workspace ws = room(5.0);
  ws.obstacles.emplace_back(Obstacle::sphere(Vec3(2, 0, 0), 1.0));
  NavSpec spec;
  CHECK_NOTHROW(check_nav_spec(spec, ws));
  spec.k = 0;
  CHECK_THROWS_AS(check_nav_spec(spec, ws), InputError);
  spec.k = 2;
  spec.target = Vec3(2, 0.5, 0);
  CHECK_THROWS_AS(check_nav_spec(spec, ws), InputError);
  spec.target = Vec3(0, 0, 6);
  CHECK_THROWS_AS(check_nav_spec(spec, ws), InputError);
  CHECK(potential_from_string("psi") == Potential::Psi);
  CHECK(potential_from_string("phi") == Potential::Phi);
  CHECK(potential_from_string("fhat") == Potential::BaseFhat);
  CHECK_THROWS_AS(potential_from_string("sigma"), InputError);
}

TEST_CASE("no overflow at large k and many obstacles") {
  const Scene sc = load_scene("scenes/truss.json");
  NavSpec spec = sc.spec;
  spec.k = 400;
  std::mt19937_64 rng(2);
  // gamma^400 / beta itself leaves double range, so only the bounded fields.
  for (int i = 0; i < 50; ++i) {
    const Vec3 x = random_free_point(rng, sc.workspace, 0.05);
    for (Potential p : {Potential::Phi, Potential::Psi}) {
      spec.potential = p;
      const FieldPoint fp = potential(spec, sc.workspace, x);
      CHECK(std::isfinite(fp.gradient.norm()));
      CHECK(std::isfinite(fp.value));
    }
  }
}
