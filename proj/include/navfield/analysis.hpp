#pragma once

#include "navfield/field.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace navfield {

// ---------------------------------------------------------------------------
// Critical points

enum class CriticalClass { Minimum, Saddle, Maximum, Degenerate };

std::string_view to_string(CriticalClass c);

/// Where a critical point sits. `obstacle` is set for NearObstacle.
struct Region {
  enum Kind { Target, Interior, NearBoundary, NearObstacle } kind = Interior;
  std::size_t obstacle = 0;

  bool operator==(const Region&) const = default;
};

std::string to_string(const Region& r);

struct CriticalPoint {
  Vec3 x = Vec3::Zero();
  double grad_norm = 0.0;      ///< |grad| of the spec's potential at x
  double log_grad_norm = 0.0;  ///< |grad L| for L = log gamma - log(beta)/k, the search function
  Vec3 eigenvalues = Vec3::Zero();  ///< of the potential's Hessian, ascending
  CriticalClass cls = CriticalClass::Degenerate;
  Region region;
  std::size_t hits = 1;  ///< number of starts that converged here
};

struct CriticalSearchOptions {
  int n_starts = 500;
  /// Extra Levenberg-Marquardt seeds just outside each primitive obstacle
  /// surface (merged members included). At large k the saddles hug the
  /// obstacles and have small basins.
  int obstacle_seeds = 64;
  std::uint64_t seed = 1;
  unsigned threads = 1;  ///< 0 = hardware concurrency
  int max_iters = 200;
  double merge_radius_rel = 1e-5;  ///< duplicate radius relative to r0
  double eig_tol_rel = 1e-7;       ///< |lambda| <= this * max|lambda| counts as zero
  double interior_beta_rel = 0.05; ///< min beta >= this * r0^2 is Interior
};

struct CriticalPointReport {
  std::vector<CriticalPoint> points;  ///< target first, then by position of discovery
  int starts = 0;
  int converged_starts = 0;
  std::vector<std::string> messages;

  /// Minima other than the target.
  std::size_t spurious_minima() const;
};

/// Multi-start search for critical points of the potential.
///
/// All three potentials are increasing functions of w = gamma / beta^(1/k),
/// so they share critical points away from the target. The search works on
/// L = log w, whose gradient grad(gamma)/gamma - sum grad(beta_i)/(k beta_i)
/// stays well scaled where the potential itself is nearly flat. Even starts
/// run Levenberg-Marquardt on grad L = 0; odd starts descend L first and then
/// polish, which is what finds minima. Near-surface seeds (obstacle_seeds)
/// also run Levenberg-Marquardt. Converged points are merged, then
/// classified from the eigenvalues of hessian_at_critical. The target is
/// always included. Deterministic for a given seed and any thread count.
CriticalPointReport find_critical_points(const NavSpec& spec, const Workspace& ws,
                                         const CriticalSearchOptions& opts = {});

/// Result of following the descent of L from a point.
struct DescentResult {
  Vec3 x = Vec3::Zero();
  bool reached_target = false;
  bool is_minimum = false;  ///< non-target point with positive-definite Hessian of L
  int iterations = 0;
};

/// Adaptive-step descent of L from `x0`, then a Newton polish. Used to
/// decide whether a slow robot is heading for a spurious minimum.
/// `target_radius` is the distance to p_d that counts as arriving.
DescentResult descend_to_minimum(const NavSpec& spec, const Workspace& ws, const Vec3& x0,
                                 double target_radius, int max_iters = 20000);

struct SweepRow {
  int k;
  std::size_t spurious_minima;
  std::size_t critical_points;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::optional<int> threshold;  ///< smallest k in range with zero spurious minima
};

/// find_critical_points for every k in [k_min, k_max].
SweepResult no_local_minima_sweep(const NavSpec& spec, const Workspace& ws, int k_min, int k_max,
                                  const CriticalSearchOptions& opts = {});

// ---------------------------------------------------------------------------
// Parameter bounds

/// Q_i = 1/4 grad(gamma_d) . grad(beta_i) - gamma_d.
double q_i(const NavSpec& spec, const Shape& obstacle, const Vec3& x);

/// Distance from p_d to the obstacle's core: sphere center, full-cylinder
/// axis line, capped-cylinder axis segment.
double core_distance(const Obstacle& ob, const Vec3& p);

/// Upper bound on Q_i over the shell 0 < beta_i <= eps:
///   D (sqrt(eps + r_i^2) - D),  D = core_distance(p_d).
/// For cylinders this is the bound with the axis point taken as the foot of
/// p_d, where the cylinder and sphere forms coincide. Valid for
/// eps <= beta_i(p_d). Throws InputError when beta_i(p_d) <= 0 or for the
/// boundary.
double q_i_max_bound(const NavSpec& spec, const Obstacle& ob, double eps);

struct ShellSampling {
  int samples = 20000;            ///< accepted points per shell
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double shell_scale = 1.0;       ///< sample B(shell_scale * eps') instead of B(eps')
  double exclude_abs = 1e-12;     ///< denominators below this are skipped
  double low_confidence_ratio = 0.01;
  int max_tries_factor = 200;     ///< rejection budget per accepted point
};

struct ShellEstimate {
  double eps_prime = 0.0;
  /// +inf when the denominator is nonpositive on every sample (no constraint).
  double eps_doubleprime = 0.0;
  int samples = 0;
  int excluded = 0;
  bool low_confidence = false;
  std::string note;
};

struct ObstacleEpsilon {
  std::size_t index;
  ShellEstimate est;
  double grad_bound;  ///< max over the room of |grad beta_i|
};

struct PairEpsilon {
  std::size_t i;
  std::size_t j;
  ShellEstimate est;
};

struct EpsilonBounds {
  std::vector<ObstacleEpsilon> per_obstacle;
  std::vector<PairEpsilon> per_pair;
  double boundary_grad_bound = 0.0;
  double eps0 = 0.0;
  std::uint64_t n_of_eps = 1;  ///< saturates at UINT64_MAX when eps0 is 0
};

/// eps'_0i = beta_i(p_d); eps''_0i and the pair versions estimated on
/// quasi-random samples of the shells; eps0 the minimum of all; N(eps0).
/// `intersecting` lists the obstacle pairs that are allowed to intersect
/// (usually from scene validation). Throws InputError naming the obstacle
/// when a shell yields no samples.
EpsilonBounds epsilon_bounds(const NavSpec& spec, const Workspace& ws,
                             const std::vector<std::pair<std::size_t, std::size_t>>& intersecting = {},
                             const ShellSampling& cfg = {});

/// Max over the room of |grad beta_i|: 2 (r0 + dist(0, core)) for
/// primitives, sampled for merged obstacles.
double gradient_bound(const Shape& s, double outer_radius);

/// N(eps) = ceil((r0 + |p_d|) / (2 eps) * sum of gradient bounds), the
/// boundary's 2 r0 included. Saturates at UINT64_MAX.
std::uint64_t n_of_eps(const NavSpec& spec, const Workspace& ws, double eps);

/// Same, from a precomputed gradient-bound sum.
std::uint64_t n_of_eps(double outer_radius, const Vec3& target, double grad_bound_sum, double eps);

// ---------------------------------------------------------------------------
// Reports

std::string critical_report_json(const CriticalPointReport& r);
std::string epsilon_report_json(const EpsilonBounds& b);

}  // namespace navfield
