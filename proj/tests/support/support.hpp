#pragma once

// Oracles and random scene generators shared by the unit and acceptance tests.

#include "navfield/field.hpp"
#include "navfield/geometry.hpp"
#include "navfield/scene.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace navfield::test {

// Central differences; the step is scaled by the coordinate magnitude.
inline Vec3 fd_grad(const std::function<double(const Vec3&)>& f, const Vec3& x, double h = 1e-6) {
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    const double hi = h * std::max(1.0, std::abs(x[i]));
    Vec3 a = x, b = x;
    a[i] += hi;
    b[i] -= hi;
    g[i] = (f(a) - f(b)) / (2.0 * hi);
  }
  return g;
}

// Columns are central differences of the analytic gradient.
inline Mat3 fd_hess(const std::function<Vec3(const Vec3&)>& g, const Vec3& x, double h = 1e-6) {
  Mat3 H;
  for (int i = 0; i < 3; ++i) {
    const double hi = h * std::max(1.0, std::abs(x[i]));
    Vec3 a = x, b = x;
    a[i] += hi;
    b[i] -= hi;
    H.col(i) = (g(a) - g(b)) / (2.0 * hi);
  }
  return 0.5 * (H + H.transpose());
}

// |a - b| relative to the larger magnitude, with an absolute floor for
// quantities that are nearly zero.
inline double rel_err(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}
inline double rel_err(const Vec3& a, const Vec3& b, double floor) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}
inline double rel_err(const Mat3& a, const Mat3& b, double floor) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline Vec3 random_in_ball(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(u(rng), u(rng), u(rng));
  } while (v.squaredNorm() > 1.0);
  return radius * v;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Euclidean clearance between two primitives (negative when overlapping).
inline double primitive_gap(const Obstacle& a, const Obstacle& b, double r0) {
  return segment_segment_closest(core_segment(a, r0), core_segment(b, r0)).distance - a.radius() - b.radius();
}

inline Obstacle random_primitive(std::mt19937_64& rng, double r0, int kind) {
  const double r = uniform(rng, 0.05, 0.15) * r0;
  const Vec3 c = random_in_ball(rng, 0.6 * r0);
  switch (kind) {
    case 0:
      return Obstacle::sphere(c, r);
    case 1:
      return Obstacle::full_cylinder(c, random_unit(rng), 0.5 * r);
    default: {
      const Vec3 d = random_unit(rng) * uniform(rng, 0.1, 0.3) * r0;
      return Obstacle::capped_cylinder(c - d, c + d, 0.6 * r);
    }
  }
}

struct RandomSceneOptions {
  int min_obstacles = 1;
  int max_obstacles = 5;
  bool allow_full_cylinders = true;
  double min_gap_rel = 0.03;  ///< pairwise clearance and wall clearance, times r0
};

// A valid scene of disjoint primitives with a free target.
inline Scene random_scene(std::uint64_t seed, const RandomSceneOptions& o = {}) {
  std::mt19937_64 rng(seed);
  Scene sc;
  const double r0 = uniform(rng, 3.0, 10.0);
  sc.workspace.outer_radius = r0;
  const int n = std::uniform_int_distribution<int>(o.min_obstacles, o.max_obstacles)(rng);
  const int kinds = o.allow_full_cylinders ? 3 : 2;
  std::vector<Obstacle> obs;
  for (int tries = 0; static_cast<int>(obs.size()) < n && tries < 10000; ++tries) {
    int kind = std::uniform_int_distribution<int>(0, kinds - 1)(rng);
    if (!o.allow_full_cylinders && kind == 1) kind = 2;
    const Obstacle ob = random_primitive(rng, r0, kind);
    const double margin = o.min_gap_rel * r0;
    if (ob.kind() != ObstacleKind::FullCylinder &&
        point_segment_distance(Vec3::Zero(), core_segment(ob, r0)) + ob.radius() > r0 - margin) {
      continue;
    }
    bool ok = true;
    for (const Obstacle& q : obs) ok = ok && primitive_gap(ob, q, r0) > margin;
    // Two full cylinders always meet unless parallel; keep at most one.
    if (ob.kind() == ObstacleKind::FullCylinder) {
      for (const Obstacle& q : obs) ok = ok && q.kind() != ObstacleKind::FullCylinder;
    }
    if (ok) obs.push_back(ob);
  }
  for (const Obstacle& ob : obs) sc.workspace.obstacles.emplace_back(ob);
  for (int tries = 0;; ++tries) {
    const Vec3 t = random_in_ball(rng, 0.8 * r0);
    if (min_beta(sc.workspace, t) > 0.05 * r0 * r0) {
      sc.spec.target = t;
      break;
    }
  }
  sc.spec.k = std::uniform_int_distribution<int>(1, 8)(rng);
  return sc;
}

// Free point at least `clearance` from every surface and the wall.
inline Vec3 random_free_point(std::mt19937_64& rng, const Workspace& ws, double clearance) {
  for (;;) {
    const Vec3 x = random_in_ball(rng, ws.outer_radius - clearance);
    bool ok = true;
    for (const Shape& s : ws.obstacles) {
      if (const auto* ob = std::get_if<Obstacle>(&s)) {
        ok = ok && surface_distance(*ob, x) > clearance;
      } else {
        for (const Obstacle& m : std::get<MergedObstacle>(s).members()) ok = ok && surface_distance(m, x) > clearance;
        ok = ok && shape_beta(s, x) > 0.0;
      }
    }
    if (ok) return x;
  }
}

// Distance to the nearest gluing plane of a capped cylinder.
inline double gluing_plane_distance(const Obstacle& ob, const Vec3& x) {
  const double t = ob.axis_dir().dot(x - ob.p1());
  const double len = (ob.p2() - ob.p1()).norm();
  return std::min(std::abs(t), std::abs(t - len));
}

// Uniform in the radial coordinate of the shell 0 < beta <= eps.
inline Vec3 shell_point(std::mt19937_64& rng, const Obstacle& ob, double eps) {
  const double r = ob.radius();
  const double rho = std::sqrt(uniform(rng, r * r, r * r + eps));
  const Vec3 u = random_unit(rng);
  if (ob.kind() == ObstacleKind::Sphere) return ob.center() + rho * u;
  const Vec3 v = ob.axis_dir();
  const Vec3 n = (u - u.dot(v) * v).normalized();
  if (ob.kind() == ObstacleKind::FullCylinder) return ob.axis_point() + uniform(rng, -3.0, 3.0) * v + rho * n;
  // Capped: tube or one of the caps.
  const double len = (ob.p2() - ob.p1()).norm();
  const double t = uniform(rng, -rho, len + rho);
  if (t < 0.0) return ob.p1() + rho * (u.dot(v) > 0 ? Vec3(-u) : u);
  if (t > len) return ob.p2() + rho * (u.dot(v) < 0 ? Vec3(-u) : u);
  return ob.p1() + t * v + rho * n;
}

// Closed-form minimal joint factor, written out independently of the library.
inline double h_prime(double theta) {
  const double s2 = std::pow(std::sin(0.5 * theta), 2);
  return std::sqrt((s2 * s2 - s2 + 1.0) / (s2 * (1.0 + s2)));
}

}  // namespace navfield::test
