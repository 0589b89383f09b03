#pragma once

#include "navfield/field.hpp"
#include "navfield/scene.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace navfield {

/// How a ball joint grows when the robot shrinks to a point.
///  - FullEnclosure:  r_bj + R / sin(theta/2); the whole cylinder intersection stays inside
///  - MinimalEvolute: r_bj + R h'; just enough for the evolute of the
///    intersection ellipse to stay inside it
enum class ExpansionMode { FullEnclosure, MinimalEvolute };

std::string_view to_string(ExpansionMode m);
ExpansionMode expansion_mode_from_string(std::string_view name);  // "full" | "minimal"

struct BallJoint {
  std::size_t sphere_index = 0;  ///< the joint sphere in Workspace::obstacles
  Vec3 center = Vec3::Zero();
  double radius = 0.0;           ///< r_bj before expansion
  std::vector<std::size_t> members;
  double theta = 0.0;            ///< min over member pairs of asin(|v_i x v_j|), radians
};

/// Builds the joint for a declaration, checking that it has at least two
/// members, that they are cylinders whose axes pass within tol_rel * r0 of
/// the center and whose radii agree within tol_rel * r0. Throws InputError.
BallJoint make_ball_joint(const Workspace& ws, const JointDecl& decl, double tol_rel = 1e-6);

/// make_ball_joint for every declared joint.
std::vector<BallJoint> ball_joints(const Workspace& ws, double tol_rel = 1e-6);

/// Multiplier on R added to a joint radius. theta in (0, pi]; at theta = pi
/// both modes return 1. Throws InputError outside the range.
double joint_expansion_factor(double theta, ExpansionMode mode);

/// Ellipse parameter angle phi_k where the evolute of the cylinder
/// intersection ellipse meets the ellipse: asin(sqrt(x)) with
/// x = (2h^2 - 1)/(h^4 - 1), h = 1/sin(theta/2). Returns 0 at theta = pi
/// (the ellipse is a circle and its evolute a point) and nothing for
/// theta > pi/2, where x > 1 and the evolute never reaches the ellipse.
/// Throws InputError for theta outside (0, pi].
std::optional<double> evolute_containment_angle(double theta);

/// The cubic (h^4 - 1) x^3 + 3 x^2 - 3 x + 1 - h^4/(h^2 - 1)^2 at x.
double evolute_cubic(double h, double x);

/// |tau(phi_k)| for the ellipse with b = r_plus_R and a = h b, evaluated from
/// the curve parametrization. For theta > pi/2 uses the analytic
/// continuation sqrt(a^2 (1 - x) + b^2 x).
double evolute_joint_radius(double theta, double r_plus_R);

struct JointExpansion {
  std::size_t sphere_index;
  double theta;
  double factor;       ///< h: multiplier on R
  double base_radius;  ///< r_bj
  double radius;       ///< r_bj + h R
};

struct TransformOptions {
  /// Re-validate the output against this spec's target when given.
  std::optional<NavSpec> spec;
  ValidationOptions validation;
  /// Start positions to check against the expanded obstacles.
  std::vector<Vec3> starts;
  int surface_samples = 20000;
  int volume_samples = 50000;
  std::uint64_t seed = 1;
  double slack = 1e-9;  ///< tolerance on the 2R clearance rule
};

struct TransformResult {
  Workspace point_workspace;
  /// Every obstacle (joints included) grown by exactly R; the reference for S and V.
  Workspace standard_workspace;
  ExpansionMode expansion_mode = ExpansionMode::FullEnclosure;
  double robot_radius = 0.0;
  std::vector<JointExpansion> joints;
  std::vector<std::string> violations;  ///< clearance, cluster and re-validation failures
  std::vector<std::string> warnings;
  double p_fail_surface = 0.0;
  double p_fail_volume = 0.0;

  bool valid() const { return violations.empty(); }
};

/// Spherical robot of radius R to point robot: obstacle radii + R, boundary
/// r0 - R, joint spheres per `mode`. `joints` defaults to the workspace's
/// declared joints when empty. R = 0 returns the input unchanged. Throws
/// InputError for R < 0 or R >= r0; rule violations are reported in
/// `violations` with obstacle indices.
TransformResult transform(const Workspace& ws, double R, ExpansionMode mode,
                          const std::vector<BallJoint>& joints = {}, const TransformOptions& opts = {});

struct FailureProbabilities {
  double surface = 0.0;
  double volume = 0.0;
  double surface_area = 0.0;  ///< S estimate
  double free_volume = 0.0;   ///< V estimate
};

/// Upper bounds on the chance that a start falls inside the extra joint
/// expansion:
///   P_s = 4 pi sum r'_bj^2 / S
///   P_v = (4/3) pi sum ((r_bj + h R)^3 - (r_bj + R)^3) / V
/// S is the area of the shrunken wall not covered by the standard
/// expansion (Fibonacci lattice), V the free volume under the standard
/// expansion (Halton points). Joints with h <= 1 add nothing to P_v.
/// Both are clamped to [0, 1].
FailureProbabilities failure_probabilities(const TransformResult& result, int surface_samples = 20000,
                                           int volume_samples = 50000, std::uint64_t seed = 1);

}  // namespace navfield
