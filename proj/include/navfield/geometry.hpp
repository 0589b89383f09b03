#pragma once

#include "navfield/types.hpp"

#include <string_view>

namespace navfield {

enum class ObstacleKind { WorkspaceBoundary, Sphere, FullCylinder, CappedCylinder };

std::string_view to_string(ObstacleKind kind);

/// A primitive implicit obstacle. The implicit function `beta` is positive
/// outside the obstacle, zero on its surface and negative inside. For the
/// workspace boundary the sign is flipped: positive inside the room.
///
/// Half-cylinders and finite cylinders are both capped cylinders; they only
/// differ in whether the caps lie inside the room.
///
/// Instances are validated once by the factory functions; evaluation does
/// no further checks.
class Obstacle {
 public:
  static Obstacle boundary(double outer_radius);
  static Obstacle sphere(const Vec3& center, double radius);
  /// `direction` is normalized here unless already unit within 1e-12; it must be nonzero.
  static Obstacle full_cylinder(const Vec3& axis_point, const Vec3& direction, double radius);
  static Obstacle capped_cylinder(const Vec3& p1, const Vec3& p2, double radius);

  ObstacleKind kind() const { return kind_; }
  double radius() const { return radius_; }
  /// Sphere center, boundary origin, full-cylinder axis point, capped-cylinder p1.
  const Vec3& center() const { return p1_; }
  const Vec3& axis_point() const { return p1_; }
  const Vec3& p1() const { return p1_; }
  const Vec3& p2() const { return p2_; }
  /// Unit axis; zero for spheres and the boundary.
  const Vec3& axis_dir() const { return axis_; }

  bool is_cylinder() const {
    return kind_ == ObstacleKind::FullCylinder || kind_ == ObstacleKind::CappedCylinder;
  }

  /// Same geometry with a different radius (used by the robot-radius transform).
  Obstacle with_radius(double radius) const;

  bool operator==(const Obstacle&) const = default;

 private:
  Obstacle() = default;

  ObstacleKind kind_ = ObstacleKind::Sphere;
  double radius_ = 0.0;
  Vec3 p1_ = Vec3::Zero();
  Vec3 p2_ = Vec3::Zero();
  Vec3 axis_ = Vec3::Zero();
};

double beta(const Obstacle& ob, const Vec3& x);
Vec3 beta_grad(const Obstacle& ob, const Vec3& x);
Mat3 beta_hess(const Obstacle& ob, const Vec3& x);

/// Which piece of the capped-cylinder encoding applies at a point.
/// Points on a gluing plane belong to the cap.
enum class CappedRegion { Tube, Cap1, Cap2 };

CappedRegion capped_region(const Obstacle& ob, const Vec3& x);

/// Gradient of one specific capped-cylinder piece, evaluated regardless of
/// which region `x` is in. Used to check that the pieces glue with C1 continuity.
Vec3 capped_branch_grad(const Obstacle& ob, const Vec3& x, CappedRegion region);

/// Segment [a, b]; a == b for a point.
struct Segment {
  Vec3 a;
  Vec3 b;
};

/// The set whose r-offset is the obstacle: a point for spheres, the axis
/// segment for capped cylinders, and for full cylinders the axis clipped to
/// a long segment centered at the foot of the origin (`half_length`).
Segment core_segment(const Obstacle& ob, double half_length);

/// Closest point to `x` on segment `s`.
Vec3 closest_point_on_segment(const Segment& s, const Vec3& x);
double point_segment_distance(const Vec3& x, const Segment& s);

/// Minimum distance between two segments, with the realizing points.
struct SegmentPair {
  double distance;
  Vec3 on_first;
  Vec3 on_second;
};
SegmentPair segment_segment_closest(const Segment& s, const Segment& t);

/// Signed Euclidean distance from `x` to the obstacle surface (positive
/// outside). For the boundary, positive inside the room.
double surface_distance(const Obstacle& ob, const Vec3& x);

/// A point strictly inside the obstacle: sphere center, capped-cylinder axis
/// midpoint, full-cylinder axis foot of the origin.
Vec3 interior_witness(const Obstacle& ob);

}  // namespace navfield
