#pragma once

#include "navfield/geometry.hpp"

#include <vector>

namespace navfield {

/// Smooth p-Rvachev union of two implicit obstacle values:
///   R_p(a, b) = a + b - (|a|^p + |b|^p)^(1/p),   p > 1.
/// Zero where one argument is zero and the other nonnegative, positive when
/// both are positive, negative inside either obstacle.
/// Throws InputError for p <= 1.
double rvachev_union(double a, double b, double p);

/// Gradient of the union given the member values and gradients. At a = b = 0
/// the limit grad_a + grad_b is returned.
Vec3 rvachev_grad(double a, const Vec3& grad_a, double b, const Vec3& grad_b, double p);

/// R_p and its first and second partial derivatives with respect to (a, b).
struct RvachevPartials {
  double value;
  double da, db;
  double daa, dab, dbb;
};
RvachevPartials rvachev_partials(double a, double b, double p);

/// Composite obstacle: left fold of rvachev_union over `members` in order.
/// The fold is not associative, so member order is significant.
class MergedObstacle {
 public:
  MergedObstacle(std::vector<Obstacle> members, double p = 2.0);

  const std::vector<Obstacle>& members() const { return members_; }
  double p() const { return p_; }

  bool operator==(const MergedObstacle&) const = default;

 private:
  std::vector<Obstacle> members_;
  double p_;
};

/// Value, gradient and (optionally) Hessian of an implicit function at a point.
struct ImplicitSample {
  double value = 0.0;
  Vec3 grad = Vec3::Zero();
  Mat3 hess = Mat3::Zero();
};

double merged_beta(const MergedObstacle& m, const Vec3& x);
Vec3 merged_grad(const MergedObstacle& m, const Vec3& x);
Mat3 merged_hess(const MergedObstacle& m, const Vec3& x);
ImplicitSample merged_sample(const MergedObstacle& m, const Vec3& x, bool with_hessian);

}  // namespace navfield
