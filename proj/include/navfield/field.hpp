#pragma once

#include "navfield/workspace.hpp"

#include <string_view>
#include <vector>

namespace navfield {

/// Which potential to evaluate.
///  - BaseFhat: gamma^k / beta (unbounded, singular on the free-space boundary)
///  - Phi:      gamma / (gamma^k + beta)^(1/k)
///  - Psi:      gamma / (gamma + beta^(1/k))
enum class Potential { BaseFhat, Phi, Psi };

std::string_view to_string(Potential p);
Potential potential_from_string(std::string_view name);  // "fhat" | "phi" | "psi"

struct NavSpec {
  Potential potential = Potential::Psi;
  int k = 1;
  Vec3 target = Vec3::Zero();
};

/// Throws InputError unless k >= 1 and the target is strictly inside the free space.
void check_nav_spec(const NavSpec& spec, const Workspace& ws);

struct FieldPoint {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
};

struct FieldEval {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
  double gamma = 0.0;
  double beta_total = 0.0;  ///< product of all factors; may under/overflow, see log_beta
  double log_beta = 0.0;
  std::vector<double> per_obstacle_beta;  ///< boundary first, then obstacles in order
};

double gamma_d(const NavSpec& spec, const Vec3& x);
Vec3 gamma_grad(const NavSpec& spec, const Vec3& x);

struct BetaProduct {
  double total = 0.0;
  std::vector<double> factors;  ///< boundary first, then obstacles in order
};

BetaProduct beta_product(const Workspace& ws, const Vec3& x);

/// Gradient of the product, sum over i of grad(beta_i) times the product of
/// the other factors. Omitted products use prefix/suffix arrays, so zero
/// factors are handled exactly.
Vec3 beta_product_grad(const Workspace& ws, const Vec3& x);

/// Value and gradient of the selected potential.
///
/// Inside the free space everything is computed from sums of log(beta_i), so
/// large k and many obstacles do not overflow. On the free-space boundary
/// (some beta_i == 0) Phi and Psi return exactly 1; BaseFhat throws
/// DomainError. The Psi gradient there is infinite for k > 1 and is reported
/// as NaN. Points inside an obstacle or outside the room throw DomainError.
FieldPoint potential(const NavSpec& spec, const Workspace& ws, const Vec3& x);

/// potential() plus the attractive term and the obstacle factors.
FieldEval eval(const NavSpec& spec, const Workspace& ws, const Vec3& x);

/// Full analytic Hessian of the selected potential at a free-space point.
Mat3 potential_hessian(const NavSpec& spec, const Workspace& ws, const Vec3& x);

/// Hessian at a critical point, using the simplified ratio form
/// (delta * D2 nu - nu * D2 delta) / delta^2 where the potential is nu/delta.
/// Throws DomainError if the gradient norm at `x` exceeds `grad_tol`.
Mat3 hessian_at_critical(const NavSpec& spec, const Workspace& ws, const Vec3& x, double grad_tol);

/// Default critical-point gradient tolerance for a workspace: 1e-8 * (1 + 1/r0).
double default_grad_tol(const Workspace& ws);

/// True if every factor is strictly positive at x.
bool in_free_space(const Workspace& ws, const Vec3& x);

/// Smallest factor value at x (boundary included).
double min_beta(const Workspace& ws, const Vec3& x);

}  // namespace navfield
