#include "navfield/simulate.hpp"

#include "navfield/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace navfield {

std::string_view to_string(Integrator i) {
  return i == Integrator::RK4 ? "rk4" : "semi_implicit_euler";
}

Integrator integrator_from_string(std::string_view name) {
  if (name == "semi_implicit_euler") return Integrator::SemiImplicitEuler;
  if (name == "rk4") return Integrator::RK4;
  throw InputError("unknown integrator '" + std::string(name) + "' (expected semi_implicit_euler or rk4)");
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Converged: return "converged";
    case Outcome::LocalMinimum: return "local_minimum";
    case Outcome::Timeout: return "timeout";
    case Outcome::CollisionNumerical: return "collision_numerical";
  }
  return "unknown";
}

void check_sim_config(const SimConfig& cfg) {
  auto pos = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!pos(cfg.damping_c)) throw InputError("damping c must be positive");
  if (!pos(cfg.dt)) throw InputError("dt must be positive");
  if (!pos(cfg.t_max) || cfg.t_max < cfg.dt) throw InputError("t_max must be at least dt");
  if (!pos(cfg.conv_pos_tol) || !pos(cfg.conv_speed_tol)) throw InputError("convergence tolerances must be positive");
  if (!pos(cfg.stall_grad_tol)) throw InputError("stall gradient tolerance must be positive");
  if (cfg.sample_stride < 1) throw InputError("sample_stride must be >= 1");
  if (cfg.stall_steps < 1) throw InputError("stall_steps must be >= 1");
}

double energy(const NavSpec& spec, const Workspace& ws, const Vec3& x, const Vec3& v) {
  return 0.5 * v.squaredNorm() + potential(spec, ws, x).value;
}

namespace {

struct State {
  Vec3 x;
  Vec3 v;
};

// Field value and gradient, or nothing if x has left the free space.
std::optional<FieldPoint> field_at(const NavSpec& spec, const Workspace& ws, const Vec3& x) {
  try {
    FieldPoint fp = potential(spec, ws, x);
    if (!fp.gradient.allFinite()) return std::nullopt;
    // Phi and Psi are exactly 1 only where some factor vanishes.
    if (spec.potential != Potential::BaseFhat && fp.value >= 1.0) return std::nullopt;
    return fp;
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

}  // namespace

Trajectory simulate(const NavSpec& spec, const Workspace& ws, const SimConfig& cfg, const Vec3& start) {
  check_sim_config(cfg);
  if (!start.allFinite() || !in_free_space(ws, start)) {
    throw InputError("start position is not in the free space");
  }
  const double c = cfg.damping_c;
  const double dt = cfg.dt;

  Trajectory tr;
  tr.start = start;
  State s{start, Vec3::Zero()};
  std::optional<FieldPoint> f = field_at(spec, ws, s.x);
  if (!f) {
    tr.outcome = Outcome::CollisionNumerical;
    return tr;
  }
  Vec3 acc = -f->gradient;
  tr.max_accel = acc.norm();
  tr.samples.push_back({0.0, s.x, s.v, acc, f->value});

  auto converged = [&](const State& st) {
    return (st.x - spec.target).norm() <= cfg.conv_pos_tol && st.v.norm() <= cfg.conv_speed_tol;
  };
  if (converged(s)) {
    tr.outcome = Outcome::Converged;
    return tr;
  }

  const long long n_steps = static_cast<long long>(std::ceil(cfg.t_max / dt - 1e-9));
  int stalled = 0;
  long long slow = 0;
  long long next_check = cfg.stall_steps;
  for (long long step = 1; step <= n_steps; ++step) {
    if (cfg.integrator == Integrator::SemiImplicitEuler) {
      s.v += dt * acc;
      s.x += dt * s.v;
    } else {
      // Classic RK4 on (x, v); leaving the free space at a stage is a collision.
      auto deriv = [&](const State& st) -> std::optional<State> {
        auto g = field_at(spec, ws, st.x);
        if (!g) return std::nullopt;
        return State{st.v, Vec3(-g->gradient - c * st.v)};
      };
      const State k1{s.v, acc};
      auto k2 = deriv({s.x + 0.5 * dt * k1.x, s.v + 0.5 * dt * k1.v});
      auto k3 = k2 ? deriv({s.x + 0.5 * dt * k2->x, s.v + 0.5 * dt * k2->v}) : std::nullopt;
      auto k4 = k3 ? deriv({s.x + dt * k3->x, s.v + dt * k3->v}) : std::nullopt;
      if (!k4) {
        tr.outcome = Outcome::CollisionNumerical;
        tr.t_final = step * dt;
        return tr;
      }
      s.x += dt / 6.0 * (k1.x + 2.0 * k2->x + 2.0 * k3->x + k4->x);
      s.v += dt / 6.0 * (k1.v + 2.0 * k2->v + 2.0 * k3->v + k4->v);
    }

    const double t = step * dt;
    f = field_at(spec, ws, s.x);
    if (!f) {
      tr.outcome = Outcome::CollisionNumerical;
      tr.t_final = t;
      tr.samples.push_back({t, s.x, s.v, acc, 1.0});
      return tr;
    }
    acc = -f->gradient - c * s.v;
    const double speed = s.v.norm();
    tr.max_speed = std::max(tr.max_speed, speed);
    tr.max_accel = std::max(tr.max_accel, acc.norm());

    const bool done = converged(s);
    if (!done && speed <= cfg.conv_speed_tol && f->gradient.norm() <= cfg.stall_grad_tol) {
      ++stalled;
    } else {
      stalled = 0;
    }
    bool stuck = stalled >= cfg.stall_steps;
    if (!done && speed <= cfg.conv_speed_tol) {
      ++slow;
    } else {
      slow = 0;
      next_check = cfg.stall_steps;
    }
    if (cfg.certify_stalls && !stuck && slow >= next_check) {
      const DescentResult d = descend_to_minimum(spec, ws, s.x, cfg.conv_pos_tol);
      if (d.is_minimum && (d.x - spec.target).norm() > cfg.conv_pos_tol) {
        stuck = true;
        tr.certified_minimum = d.x;
      } else {
        // Still on its way; look again after twice as long.
        next_check = 2 * slow;
      }
    }
    if (done || stuck || step == n_steps || step % cfg.sample_stride == 0) {
      tr.samples.push_back({t, s.x, s.v, acc, f->value});
    }
    if (done || stuck) {
      tr.outcome = done ? Outcome::Converged : Outcome::LocalMinimum;
      tr.t_final = t;
      return tr;
    }
  }
  tr.outcome = Outcome::Timeout;
  tr.t_final = n_steps * dt;
  return tr;
}

BatchResult simulate_batch(const NavSpec& spec, const Workspace& ws, const SimConfig& cfg,
                           const std::vector<Vec3>& starts, unsigned threads) {
  check_sim_config(cfg);
  BatchResult res;
  const std::size_t n = starts.size();
  res.trajectories.resize(n);
  res.errors.resize(n);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        res.trajectories[i] = simulate(spec, ws, cfg, starts[i]);
      } catch (const InputError& e) {
        res.trajectories[i].start = starts[i];
        res.trajectories[i].outcome = Outcome::CollisionNumerical;
        res.errors[i] = e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  BatchSummary& sum = res.summary;
  sum.time_to_converge.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Trajectory& tr = res.trajectories[i];
    if (!res.errors[i].empty()) {
      ++sum.invalid_start;
      continue;
    }
    switch (tr.outcome) {
      case Outcome::Converged:
        ++sum.converged;
        sum.time_to_converge[i] = tr.t_final;
        break;
      case Outcome::LocalMinimum: ++sum.local_minimum; break;
      case Outcome::Timeout: ++sum.timeout; break;
      case Outcome::CollisionNumerical: ++sum.collision; break;
    }
    sum.max_speed = std::max(sum.max_speed, tr.max_speed);
    sum.max_accel = std::max(sum.max_accel, tr.max_accel);
  }
  return res;
}

}  // namespace navfield
