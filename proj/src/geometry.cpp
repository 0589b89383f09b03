#include "navfield/geometry.hpp"

#include <algorithm>

namespace navfield {

namespace {

constexpr double kDegenerateLength = 1e-9;

void require_radius(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw InputError("obstacle radius must be positive and finite");
}

void require_finite(const Vec3& v, const char* what) {
  if (!v.allFinite()) throw InputError(std::string(what) + " has non-finite components");
}

// Projection of x - p on the axis, relative to each endpoint.
struct AxisCoords {
  double s1;  // v . (x - p1)
  double s2;  // v . (x - p2)
};

AxisCoords axis_coords(const Obstacle& ob, const Vec3& x) {
  const Vec3& v = ob.axis_dir();
  return {v.dot(x - ob.p1()), v.dot(x - ob.p2())};
}

}  // namespace

std::string_view to_string(ObstacleKind kind) {
  switch (kind) {
    case ObstacleKind::WorkspaceBoundary: return "boundary";
    case ObstacleKind::Sphere: return "sphere";
    case ObstacleKind::FullCylinder: return "full_cylinder";
    case ObstacleKind::CappedCylinder: return "capped_cylinder";
  }
  return "unknown";
}

Obstacle Obstacle::boundary(double outer_radius) {
  require_radius(outer_radius);
  Obstacle ob;
  ob.kind_ = ObstacleKind::WorkspaceBoundary;
  ob.radius_ = outer_radius;
  return ob;
}

Obstacle Obstacle::sphere(const Vec3& center, double radius) {
  require_radius(radius);
  require_finite(center, "sphere center");
  Obstacle ob;
  ob.kind_ = ObstacleKind::Sphere;
  ob.radius_ = radius;
  ob.p1_ = center;
  ob.p2_ = center;
  return ob;
}

Obstacle Obstacle::full_cylinder(const Vec3& axis_point, const Vec3& direction, double radius) {
  require_radius(radius);
  require_finite(axis_point, "cylinder axis point");
  require_finite(direction, "cylinder axis direction");
  const double n = direction.norm();
  if (n < kDegenerateLength) throw InputError("cylinder axis direction is zero");
  Obstacle ob;
  ob.kind_ = ObstacleKind::FullCylinder;
  ob.radius_ = radius;
  ob.p1_ = axis_point;
  ob.p2_ = axis_point;
  // Already-unit directions are kept bit-for-bit so that re-reading a saved scene is exact.
  ob.axis_ = std::abs(n - 1.0) <= 1e-12 ? direction : Vec3(direction / n);
  return ob;
}

Obstacle Obstacle::capped_cylinder(const Vec3& p1, const Vec3& p2, double radius) {
  require_radius(radius);
  require_finite(p1, "capped cylinder endpoint p1");
  require_finite(p2, "capped cylinder endpoint p2");
  const double len = (p2 - p1).norm();
  if (len < kDegenerateLength) {
    throw InputError("capped cylinder endpoints coincide; use a sphere instead");
  }
  Obstacle ob;
  ob.kind_ = ObstacleKind::CappedCylinder;
  ob.radius_ = radius;
  ob.p1_ = p1;
  ob.p2_ = p2;
  ob.axis_ = (p2 - p1) / len;
  return ob;
}

Obstacle Obstacle::with_radius(double radius) const {
  require_radius(radius);
  Obstacle ob = *this;
  ob.radius_ = radius;
  return ob;
}

CappedRegion capped_region(const Obstacle& ob, const Vec3& x) {
  const AxisCoords c = axis_coords(ob, x);
  if (c.s1 * c.s2 < 0.0) return CappedRegion::Tube;
  // s1 <= s2 always since p2 lies further along v; the sign of s1 decides the side.
  return c.s1 <= 0.0 ? CappedRegion::Cap1 : CappedRegion::Cap2;
}

Vec3 capped_branch_grad(const Obstacle& ob, const Vec3& x, CappedRegion region) {
  switch (region) {
    case CappedRegion::Tube: {
      const Vec3 d = x - ob.p1();
      const Vec3& v = ob.axis_dir();
      return 2.0 * (d - v.dot(d) * v);
    }
    case CappedRegion::Cap1: return 2.0 * (x - ob.p1());
    case CappedRegion::Cap2: return 2.0 * (x - ob.p2());
  }
  return Vec3::Zero();
}

double beta(const Obstacle& ob, const Vec3& x) {
  const double r2 = ob.radius() * ob.radius();
  switch (ob.kind()) {
    case ObstacleKind::WorkspaceBoundary: return r2 - x.squaredNorm();
    case ObstacleKind::Sphere: return (x - ob.center()).squaredNorm() - r2;
    case ObstacleKind::FullCylinder:
      return ob.axis_dir().cross(x - ob.axis_point()).squaredNorm() - r2;
    case ObstacleKind::CappedCylinder:
      switch (capped_region(ob, x)) {
        case CappedRegion::Tube: return ob.axis_dir().cross(x - ob.p1()).squaredNorm() - r2;
        case CappedRegion::Cap1: return (x - ob.p1()).squaredNorm() - r2;
        case CappedRegion::Cap2: return (x - ob.p2()).squaredNorm() - r2;
      }
  }
  return 0.0;
}

Vec3 beta_grad(const Obstacle& ob, const Vec3& x) {
  switch (ob.kind()) {
    case ObstacleKind::WorkspaceBoundary: return -2.0 * x;
    case ObstacleKind::Sphere: return 2.0 * (x - ob.center());
    case ObstacleKind::FullCylinder: {
      const Vec3 d = x - ob.axis_point();
      const Vec3& v = ob.axis_dir();
      return 2.0 * (d - v.dot(d) * v);
    }
    case ObstacleKind::CappedCylinder: return capped_branch_grad(ob, x, capped_region(ob, x));
  }
  return Vec3::Zero();
}

Mat3 beta_hess(const Obstacle& ob, const Vec3& x) {
  const Mat3 I = Mat3::Identity();
  switch (ob.kind()) {
    case ObstacleKind::WorkspaceBoundary: return -2.0 * I;
    case ObstacleKind::Sphere: return 2.0 * I;
    case ObstacleKind::FullCylinder: return 2.0 * (I - ob.axis_dir() * ob.axis_dir().transpose());
    case ObstacleKind::CappedCylinder:
      if (capped_region(ob, x) == CappedRegion::Tube) {
        return 2.0 * (I - ob.axis_dir() * ob.axis_dir().transpose());
      }
      return 2.0 * I;
  }
  return Mat3::Zero();
}

Segment core_segment(const Obstacle& ob, double half_length) {
  switch (ob.kind()) {
    case ObstacleKind::WorkspaceBoundary:
    case ObstacleKind::Sphere: return {ob.center(), ob.center()};
    case ObstacleKind::CappedCylinder: return {ob.p1(), ob.p2()};
    case ObstacleKind::FullCylinder: {
      const Vec3& v = ob.axis_dir();
      const Vec3 foot = ob.axis_point() - v.dot(ob.axis_point()) * v;
      return {foot - half_length * v, foot + half_length * v};
    }
  }
  return {ob.center(), ob.center()};
}

Vec3 closest_point_on_segment(const Segment& s, const Vec3& x) {
  const Vec3 d = s.b - s.a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return s.a;
  const double t = std::clamp(d.dot(x - s.a) / len2, 0.0, 1.0);
  return s.a + t * d;
}

double point_segment_distance(const Vec3& x, const Segment& s) {
  return (x - closest_point_on_segment(s, x)).norm();
}

// Closest points between segments (Ericson, Real-Time Collision Detection, 5.1.9).
SegmentPair segment_segment_closest(const Segment& s, const Segment& t) {
  const Vec3 d1 = s.b - s.a;
  const Vec3 d2 = t.b - t.a;
  const Vec3 r = s.a - t.a;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double u = 0.0;
  double w = 0.0;
  if (a == 0.0 && e == 0.0) {
    // both points
  } else if (a == 0.0) {
    w = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e == 0.0) {
      u = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      u = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      w = (b * u + f) / e;
      if (w < 0.0) {
        w = 0.0;
        u = std::clamp(-c / a, 0.0, 1.0);
      } else if (w > 1.0) {
        w = 1.0;
        u = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  const Vec3 p = s.a + u * d1;
  const Vec3 q = t.a + w * d2;
  return {(p - q).norm(), p, q};
}

double surface_distance(const Obstacle& ob, const Vec3& x) {
  switch (ob.kind()) {
    case ObstacleKind::WorkspaceBoundary: return ob.radius() - x.norm();
    case ObstacleKind::Sphere: return (x - ob.center()).norm() - ob.radius();
    case ObstacleKind::FullCylinder:
      return ob.axis_dir().cross(x - ob.axis_point()).norm() - ob.radius();
    case ObstacleKind::CappedCylinder:
      return point_segment_distance(x, {ob.p1(), ob.p2()}) - ob.radius();
  }
  return 0.0;
}

Vec3 interior_witness(const Obstacle& ob) {
  switch (ob.kind()) {
    case ObstacleKind::WorkspaceBoundary:
    case ObstacleKind::Sphere: return ob.center();
    case ObstacleKind::CappedCylinder: return 0.5 * (ob.p1() + ob.p2());
    case ObstacleKind::FullCylinder: {
      const Vec3& v = ob.axis_dir();
      return ob.axis_point() - v.dot(ob.axis_point()) * v;
    }
  }
  return ob.center();
}

}  // namespace navfield
