#pragma once

#include "navfield/field.hpp"

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace navfield {

enum class Integrator { SemiImplicitEuler, RK4 };

std::string_view to_string(Integrator i);
Integrator integrator_from_string(std::string_view name);  // "semi_implicit_euler" | "rk4"

/// Settings for integrating  x'' = -grad(lambda)(x) - c x'.
struct SimConfig {
  double damping_c = 0.6;
  double dt = 1e-3;               ///< seconds
  double t_max = 300.0;           ///< seconds
  double conv_pos_tol = 1e-2;     ///< meters
  double conv_speed_tol = 1e-2;   ///< m/s
  Integrator integrator = Integrator::SemiImplicitEuler;
  int sample_stride = 10;         ///< record every n-th step
  double stall_grad_tol = 1e-6;   ///< gradient norm below which a slow robot counts as stalled
  int stall_steps = 1000;         ///< consecutive stalled steps before declaring a local minimum
  /// After stall_steps slow steps (speed below conv_speed_tol) away from the
  /// target, follow the descent of the field from the current position; if it
  /// ends in a non-target minimum the run is classified LocalMinimum.
  bool certify_stalls = true;

  bool operator==(const SimConfig&) const = default;
};

/// Throws InputError if any setting is out of range.
void check_sim_config(const SimConfig& cfg);

enum class Outcome { Converged, LocalMinimum, Timeout, CollisionNumerical };

std::string_view to_string(Outcome o);

struct TrajectorySample {
  double t;
  Vec3 x;
  Vec3 v;
  Vec3 a;
  double field_value;
};

struct Trajectory {
  Vec3 start = Vec3::Zero();
  std::vector<TrajectorySample> samples;
  Outcome outcome = Outcome::Timeout;
  double t_final = 0.0;
  double max_speed = 0.0;  ///< over every integration step, not only recorded samples
  double max_accel = 0.0;
  /// Set when a LocalMinimum outcome came from stall certification: the minimum reached by descent.
  std::optional<Vec3> certified_minimum;
};

/// Integrates from rest at `start` until convergence, a stall away from the
/// target, a collision (some beta_i <= 0, meaning dt is too large) or t_max.
/// A stall is either stall_steps steps with both speed and gradient below
/// their tolerances, or (with certify_stalls) a slow phase from which the
/// descent of the field ends in a minimum other than the target.
/// Throws InputError if `start` is not in the free space.
Trajectory simulate(const NavSpec& spec, const Workspace& ws, const SimConfig& cfg, const Vec3& start);

struct BatchSummary {
  std::size_t converged = 0;
  std::size_t local_minimum = 0;
  std::size_t timeout = 0;
  std::size_t collision = 0;
  std::size_t invalid_start = 0;
  double max_speed = 0.0;
  double max_accel = 0.0;
  /// Per start; empty when the run did not converge.
  std::vector<std::optional<double>> time_to_converge;
};

struct BatchResult {
  std::vector<Trajectory> trajectories;
  /// Per-start error text for starts outside the free space (empty otherwise).
  std::vector<std::string> errors;
  BatchSummary summary;
};

/// Runs simulate() for every start, in parallel over `threads` workers
/// (0 = hardware concurrency). Results are independent of the thread count.
BatchResult simulate_batch(const NavSpec& spec, const Workspace& ws, const SimConfig& cfg,
                           const std::vector<Vec3>& starts, unsigned threads = 1);

/// Total energy 0.5 |v|^2 + lambda(x).
double energy(const NavSpec& spec, const Workspace& ws, const Vec3& x, const Vec3& v);

}  // namespace navfield
