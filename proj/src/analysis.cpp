#include "navfield/analysis.hpp"

#include "navfield/sampling.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace navfield {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// L = log gamma - (1/k) sum log beta_i and its derivatives. Empty outside the
// free space and at the target, where L is -inf.
struct LogW {
  double value = 0.0;
  Vec3 grad = Vec3::Zero();
  Mat3 hess = Mat3::Zero();
};

std::optional<LogW> log_w(const NavSpec& spec, const Workspace& ws, const Vec3& x, bool with_hessian) {
  if (!x.allFinite()) return std::nullopt;
  const double gamma = gamma_d(spec, x);
  if (!(gamma > 0.0)) return std::nullopt;
  const Vec3 gg = gamma_grad(spec, x);
  const double inv_k = 1.0 / spec.k;
  LogW out;
  out.value = std::log(gamma);
  out.grad = gg / gamma;
  if (with_hessian) out.hess = 2.0 / gamma * Mat3::Identity() - gg * gg.transpose() / (gamma * gamma);

  auto add = [&](const ImplicitSample& s) {
    if (!(s.value > 0.0)) return false;
    const Vec3 gi = s.grad / s.value;
    out.value -= inv_k * std::log(s.value);
    out.grad -= inv_k * gi;
    if (with_hessian) out.hess -= inv_k * (s.hess / s.value - gi * gi.transpose());
    return true;
  };
  const Obstacle bnd = ws.boundary();
  ImplicitSample b{beta(bnd, x), beta_grad(bnd, x), with_hessian ? beta_hess(bnd, x) : Mat3::Zero()};
  if (!add(b)) return std::nullopt;
  for (const Shape& s : ws.obstacles) {
    if (!add(shape_sample(s, x, with_hessian))) return std::nullopt;
  }
  if (!std::isfinite(out.value) || !out.grad.allFinite()) return std::nullopt;
  return out;
}

Vec3 sorted_eigenvalues(const Mat3& h) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (h + h.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues();  // ascending
}

// Levenberg-Marquardt on grad L = 0. Returns the point if the Newton step
// fell below step_tol.
struct PolishResult {
  std::optional<Vec3> x;
  bool hit_target = false;
};

PolishResult polish(const NavSpec& spec, const Workspace& ws, Vec3 x, int max_iters, double step_tol,
                    double target_radius) {
  auto cur = log_w(spec, ws, x, true);
  if (!cur) return {};
  double mu = 1e-3 * cur->hess.squaredNorm();
  for (int it = 0; it < max_iters; ++it) {
    if ((x - spec.target).norm() <= target_radius) return {std::nullopt, true};
    const Mat3& J = cur->hess;
    const Vec3& F = cur->grad;
    const Vec3 newton = J.fullPivLu().solve(-F);
    if (newton.allFinite() && newton.norm() <= step_tol) return {x, false};
    bool accepted = false;
    for (int tries = 0; tries < 30 && !accepted; ++tries) {
      const Vec3 step = (J.transpose() * J + mu * Mat3::Identity()).ldlt().solve(-J.transpose() * F);
      const Vec3 y = x + step;
      auto next = log_w(spec, ws, y, true);
      if (next && next->grad.norm() < F.norm()) {
        x = y;
        cur = next;
        mu = std::max(mu / 3.0, 1e-30);
        accepted = true;
      } else {
        mu = std::max(mu * 4.0, 1e-300);
      }
    }
    if (!accepted) {
      // No decrease possible; accept if already stationary to working precision.
      if (newton.allFinite() && newton.norm() <= 1e3 * step_tol) return {x, false};
      return {};
    }
  }
  return {};
}

// Normalized gradient descent on L with an adaptive step.
struct DescentTrace {
  Vec3 x;
  bool reached_target = false;
  int iterations = 0;
};

DescentTrace descend(const NavSpec& spec, const Workspace& ws, Vec3 x, double target_radius,
                     int max_iters) {
  const double r0 = ws.outer_radius;
  double s = 1e-2 * r0;
  auto cur = log_w(spec, ws, x, false);
  DescentTrace tr{x};
  if (!cur) return tr;
  int it = 0;
  for (; it < max_iters; ++it) {
    if ((x - spec.target).norm() <= target_radius) {
      tr.reached_target = true;
      break;
    }
    const double gn = cur->grad.norm();
    if (gn == 0.0 || s < 1e-10 * r0) break;
    const Vec3 y = x - s * cur->grad / gn;
    auto next = log_w(spec, ws, y, false);
    if (next && next->value < cur->value) {
      x = y;
      cur = next;
      s = std::min(1.5 * s, 0.1 * r0);
    } else if (!next && (y - spec.target).norm() <= target_radius) {
      // Stepped exactly onto the target.
      x = y;
      tr.reached_target = true;
      break;
    } else {
      s *= 0.5;
    }
  }
  tr.x = x;
  tr.iterations = it;
  return tr;
}

CriticalClass classify(const Vec3& eig, double tol) {
  int neg = 0, pos = 0;
  for (int d = 0; d < 3; ++d) {
    if (std::abs(eig[d]) <= tol) return CriticalClass::Degenerate;
    (eig[d] < 0 ? neg : pos)++;
  }
  if (neg == 0) return CriticalClass::Minimum;
  if (pos == 0) return CriticalClass::Maximum;
  return CriticalClass::Saddle;
}

Region region_of(const Workspace& ws, const NavSpec& spec, const Vec3& x, double merge_radius,
                 double interior_beta) {
  if ((x - spec.target).norm() <= merge_radius) return {Region::Target, 0};
  double best = beta(ws.boundary(), x);
  Region r{Region::NearBoundary, 0};
  for (std::size_t i = 0; i < ws.obstacles.size(); ++i) {
    const double b = shape_beta(ws.obstacles[i], x);
    if (b < best) {
      best = b;
      r = {Region::NearObstacle, i};
    }
  }
  if (best >= interior_beta) return {Region::Interior, 0};
  return r;
}

std::vector<Obstacle> primitive_members(const Workspace& ws) {
  std::vector<Obstacle> out;
  for (const Shape& s : ws.obstacles) {
    if (const auto* ob = std::get_if<Obstacle>(&s)) {
      out.push_back(*ob);
    } else {
      const auto& m = std::get<MergedObstacle>(s).members();
      out.insert(out.end(), m.begin(), m.end());
    }
  }
  return out;
}

unsigned resolve_threads(unsigned t, std::size_t work) {
  if (t == 0) t = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(work, 1)));
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = resolve_threads(threads, n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  if (threads <= 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
}

}  // namespace

std::string_view to_string(CriticalClass c) {
  switch (c) {
    case CriticalClass::Minimum: return "minimum";
    case CriticalClass::Saddle: return "saddle";
    case CriticalClass::Maximum: return "maximum";
    case CriticalClass::Degenerate: return "degenerate";
  }
  return "unknown";
}

std::string to_string(const Region& r) {
  switch (r.kind) {
    case Region::Target: return "target";
    case Region::Interior: return "interior";
    case Region::NearBoundary: return "near_boundary";
    case Region::NearObstacle: return "near_obstacle(" + std::to_string(r.obstacle) + ")";
  }
  return "unknown";
}

std::size_t CriticalPointReport::spurious_minima() const {
  return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](const CriticalPoint& p) {
    return p.cls == CriticalClass::Minimum && p.region.kind != Region::Target;
  }));
}

CriticalPointReport find_critical_points(const NavSpec& spec, const Workspace& ws,
                                         const CriticalSearchOptions& opts) {
  check_nav_spec(spec, ws);
  const double r0 = ws.outer_radius;
  const double merge_radius = opts.merge_radius_rel * r0;
  const double step_tol = 1e-11 * r0;

  // Seeds: scrambled Halton points of the ball that land in the free space.
  std::vector<Vec3> seeds;
  const Halton3 halton(opts.seed);
  for (std::uint64_t i = 0; seeds.size() < static_cast<std::size_t>(std::max(opts.n_starts, 0)) &&
                            i < 1000ull * static_cast<std::uint64_t>(opts.n_starts) + 1000;
       ++i) {
    const Vec3 x = unit_cube_to_ball(halton(i), r0);
    if (in_free_space(ws, x)) seeds.push_back(x);
  }
  const std::size_t n_uniform = seeds.size();
  for (const Obstacle& ob : primitive_members(ws)) {
    const Halton3 h(opts.seed + 7919);
    const Segment core = core_segment(ob, r0);
    for (int i = 0; i < opts.obstacle_seeds; ++i) {
      const Vec3 u = h(static_cast<std::uint64_t>(i));
      const Vec3 dir = unit_cube_to_ball(Vec3(u.y(), u.z(), 1.0 - 1e-12), 1.0);
      // Offsets log-uniform between 1e-3 r and r.
      const double frac = std::fmod(0.6180339887498949 * (i + 1), 1.0);
      const Vec3 x = core.a + u.x() * (core.b - core.a) + ob.radius() * (1.0 + std::pow(10.0, -3.0 + 3.0 * frac)) * dir;
      if (x.norm() < r0 && in_free_space(ws, x)) seeds.push_back(x);
    }
  }

  struct StartResult {
    std::optional<Vec3> x;
    bool target = false;
  };
  std::vector<StartResult> results(seeds.size());
  parallel_for(seeds.size(), opts.threads, [&](std::size_t i) {
    Vec3 x0 = seeds[i];
    if (i < n_uniform && i % 2 == 1) {
      const DescentTrace d = descend(spec, ws, x0, merge_radius, 5000);
      if (d.reached_target) {
        results[i].target = true;
        return;
      }
      x0 = d.x;
    }
    const PolishResult p = polish(spec, ws, x0, opts.max_iters, step_tol, merge_radius);
    results[i] = {p.x, p.hit_target};
  });

  CriticalPointReport rep;
  rep.starts = static_cast<int>(seeds.size());
  if (static_cast<int>(n_uniform) < opts.n_starts) {
    rep.messages.push_back("only " + std::to_string(n_uniform) + " of " + std::to_string(opts.n_starts) +
                           " seeds could be placed in the free space");
  }

  CriticalPoint target;
  target.x = spec.target;
  target.region = {Region::Target, 0};
  target.hits = 0;
  rep.points.push_back(target);
  int failed = 0;
  for (const StartResult& r : results) {
    if (r.target) {
      ++rep.points[0].hits;
      ++rep.converged_starts;
      continue;
    }
    if (!r.x) {
      ++failed;
      continue;
    }
    ++rep.converged_starts;
    if ((*r.x - spec.target).norm() <= merge_radius) {
      ++rep.points[0].hits;
      continue;
    }
    auto same = std::find_if(rep.points.begin(), rep.points.end(),
                             [&](const CriticalPoint& p) { return (p.x - *r.x).norm() <= merge_radius; });
    if (same != rep.points.end()) {
      ++same->hits;
      continue;
    }
    CriticalPoint cp;
    cp.x = *r.x;
    rep.points.push_back(cp);
  }
  if (failed > 0) rep.messages.push_back(std::to_string(failed) + " starts did not converge");

  for (CriticalPoint& cp : rep.points) {
    const FieldPoint fp = potential(spec, ws, cp.x);
    cp.grad_norm = fp.gradient.norm();
    if (cp.region.kind != Region::Target) {
      auto lw = log_w(spec, ws, cp.x, false);
      cp.log_grad_norm = lw ? lw->grad.norm() : kInf;
      cp.region = region_of(ws, spec, cp.x, merge_radius, opts.interior_beta_rel * r0 * r0);
    }
    // The search already certified stationarity through L, so the gradient
    // check inside hessian_at_critical only guards against gross misuse.
    const double tol = std::max(default_grad_tol(ws), 2.0 * cp.grad_norm);
    cp.eigenvalues = sorted_eigenvalues(hessian_at_critical(spec, ws, cp.x, tol));
    const double scale = cp.eigenvalues.cwiseAbs().maxCoeff();
    cp.cls = classify(cp.eigenvalues, opts.eig_tol_rel * scale);
  }
  return rep;
}

DescentResult descend_to_minimum(const NavSpec& spec, const Workspace& ws, const Vec3& x0,
                                 double target_radius, int max_iters) {
  DescentResult out;
  const DescentTrace d = descend(spec, ws, x0, target_radius, max_iters);
  out.x = d.x;
  out.iterations = d.iterations;
  if (d.reached_target) {
    out.reached_target = true;
    return out;
  }
  const PolishResult p = polish(spec, ws, d.x, 100, 1e-11 * ws.outer_radius, target_radius);
  if (p.hit_target) {
    out.reached_target = true;
    return out;
  }
  if (!p.x) return out;
  out.x = *p.x;
  auto lw = log_w(spec, ws, out.x, true);
  if (!lw) return out;
  const Vec3 eig = sorted_eigenvalues(lw->hess);
  out.is_minimum = eig[0] > 1e-7 * eig.cwiseAbs().maxCoeff();
  return out;
}

SweepResult no_local_minima_sweep(const NavSpec& spec, const Workspace& ws, int k_min, int k_max,
                                  const CriticalSearchOptions& opts) {
  if (k_min < 1 || k_max < k_min) throw InputError("sweep range must satisfy 1 <= k_min <= k_max");
  SweepResult out;
  for (int k = k_min; k <= k_max; ++k) {
    NavSpec s = spec;
    s.k = k;
    const CriticalPointReport rep = find_critical_points(s, ws, opts);
    const std::size_t spurious = rep.spurious_minima();
    out.rows.push_back({k, spurious, rep.points.size()});
    if (spurious == 0 && !out.threshold) out.threshold = k;
  }
  return out;
}

// ---------------------------------------------------------------------------

double q_i(const NavSpec& spec, const Shape& obstacle, const Vec3& x) {
  const ImplicitSample s = shape_sample(obstacle, x, false);
  return 0.25 * gamma_grad(spec, x).dot(s.grad) - gamma_d(spec, x);
}

double core_distance(const Obstacle& ob, const Vec3& p) {
  switch (ob.kind()) {
    case ObstacleKind::Sphere:
    case ObstacleKind::WorkspaceBoundary:
      return (p - ob.center()).norm();
    case ObstacleKind::FullCylinder: {
      const Vec3 d = p - ob.axis_point();
      return (d - d.dot(ob.axis_dir()) * ob.axis_dir()).norm();
    }
    case ObstacleKind::CappedCylinder:
      return point_segment_distance(p, {ob.p1(), ob.p2()});
  }
  return 0.0;
}

double q_i_max_bound(const NavSpec& spec, const Obstacle& ob, double eps) {
  if (ob.kind() == ObstacleKind::WorkspaceBoundary) {
    throw InputError("q_i_max_bound: not defined for the workspace boundary");
  }
  if (!(beta(ob, spec.target) > 0.0)) throw InputError("q_i_max_bound: target is not outside the obstacle");
  if (!(eps >= 0.0)) throw InputError("q_i_max_bound: eps must be nonnegative");
  const double d = core_distance(ob, spec.target);
  return d * (std::sqrt(eps + ob.radius() * ob.radius()) - d);
}

double gradient_bound(const Shape& s, double outer_radius) {
  const double r0 = outer_radius;
  if (const auto* ob = std::get_if<Obstacle>(&s)) {
    switch (ob->kind()) {
      case ObstacleKind::WorkspaceBoundary: return 2.0 * r0;
      case ObstacleKind::Sphere: return 2.0 * (r0 + ob->center().norm());
      case ObstacleKind::FullCylinder:
      case ObstacleKind::CappedCylinder: return 2.0 * (r0 + core_distance(*ob, Vec3::Zero()));
    }
  }
  // Sampled: the composite has no simple closed form.
  const auto& m = std::get<MergedObstacle>(s);
  const Halton3 h(0);
  double best = 0.0;
  for (std::uint64_t i = 0; i < 8192; ++i) {
    const Vec3 x = unit_cube_to_ball(h(i), r0);
    best = std::max(best, merged_grad(m, x).norm());
  }
  for (int i = 0; i < 2048; ++i) {
    best = std::max(best, merged_grad(m, r0 * fibonacci_sphere(i, 2048)).norm());
  }
  return best;
}

std::uint64_t n_of_eps(double outer_radius, const Vec3& target, double grad_bound_sum, double eps) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  if (!(eps > 0.0)) return kMax;
  const double n = std::ceil((outer_radius + target.norm()) * grad_bound_sum / (2.0 * eps));
  if (!(n < 1.8e19)) return kMax;
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(n));
}

std::uint64_t n_of_eps(const NavSpec& spec, const Workspace& ws, double eps) {
  double sum = 2.0 * ws.outer_radius;
  for (const Shape& s : ws.obstacles) sum += gradient_bound(s, ws.outer_radius);
  return n_of_eps(ws.outer_radius, spec.target, sum, eps);
}

namespace {

struct Box {
  Vec3 lo;
  Vec3 hi;
};

Box shell_box(const Shape& s, double eps, double r0) {
  const Box room{Vec3::Constant(-r0), Vec3::Constant(r0)};
  const auto* ob = std::get_if<Obstacle>(&s);
  if (!ob) return room;
  const Segment seg = core_segment(*ob, r0);
  const double rho = std::sqrt(eps + ob->radius() * ob->radius());
  Box b{seg.a.cwiseMin(seg.b) - Vec3::Constant(rho), seg.a.cwiseMax(seg.b) + Vec3::Constant(rho)};
  b.lo = b.lo.cwiseMax(room.lo);
  b.hi = b.hi.cwiseMin(room.hi);
  return b;
}

// A unit vector perpendicular to g; for cylinders also perpendicular to the axis.
Vec3 test_direction(const Shape& s, const Vec3& g) {
  if (const auto* ob = std::get_if<Obstacle>(&s); ob && ob->is_cylinder()) {
    const Vec3 c = g.cross(ob->axis_dir());
    if (c.norm() > 1e-12 * g.norm()) return c.normalized();
  }
  return any_perpendicular(g);
}

struct Sample {
  bool accepted = false;
  bool excluded = false;
  double log_num = 0.0;
  double log_den = 0.0;  // log |denominator|
  bool den_positive = false;
};

// One shell: `focus` holds one obstacle (per-obstacle bound) or two (pair).
ShellEstimate sample_shell(const NavSpec& spec, const Workspace& ws, const std::vector<std::size_t>& focus,
                           double eps_prime, const ShellSampling& cfg, std::uint64_t stream,
                           const std::string& what) {
  ShellEstimate est;
  est.eps_prime = eps_prime;
  const double r0 = ws.outer_radius;
  const double eps = cfg.shell_scale * eps_prime;
  Box box = shell_box(ws.obstacles[focus[0]], eps, r0);
  for (std::size_t f = 1; f < focus.size(); ++f) {
    const Box o = shell_box(ws.obstacles[focus[f]], eps, r0);
    box.lo = box.lo.cwiseMax(o.lo);
    box.hi = box.hi.cwiseMin(o.hi);
  }
  if ((box.hi - box.lo).minCoeff() <= 0.0) throw InputError("epsilon_bounds: shell of " + what + " is empty");

  const double inv_k = 1.0 / spec.k;
  const Obstacle bnd = ws.boundary();
  const std::size_t n_all = ws.obstacles.size() + 1;
  auto eval_point = [&](const Vec3& x) {
    Sample out;
    std::vector<ImplicitSample> fs(n_all);
    fs[0] = {beta(bnd, x), beta_grad(bnd, x), beta_hess(bnd, x)};
    if (!(fs[0].value > 0.0)) return out;
    for (std::size_t j = 0; j < ws.obstacles.size(); ++j) {
      fs[j + 1] = shape_sample(ws.obstacles[j], x, true);
      if (!(fs[j + 1].value > 0.0)) return out;
    }
    for (std::size_t f : focus) {
      if (fs[f + 1].value > eps) return out;
    }
    out.accepted = true;

    // Log-derivatives of the product of the other factors.
    double log_bar = 0.0;
    Vec3 G = Vec3::Zero();
    Mat3 H = Mat3::Zero(), outer = Mat3::Zero();
    for (std::size_t j = 0; j < n_all; ++j) {
      if (j > 0 && std::find(focus.begin(), focus.end(), j - 1) != focus.end()) continue;
      const ImplicitSample& s = fs[j];
      const Vec3 gj = s.grad / s.value;
      log_bar += std::log(s.value);
      G += gj;
      H += s.hess / s.value;
      outer += gj * gj.transpose();
    }
    H += G * G.transpose() - outer;

    const double gamma = gamma_d(spec, x);
    const Vec3 gg = gamma_grad(spec, x);
    const ImplicitSample& a = fs[focus[0] + 1];
    Vec3 u;
    double num;
    if (focus.size() == 1) {
      if (a.grad.norm() == 0.0) {
        out.excluded = true;
        return out;
      }
      u = test_direction(ws.obstacles[focus[0]], a.grad);
      const double q = 0.25 * gg.dot(a.grad) - gamma;
      num = 2.0 * std::abs(q);
    } else {
      const ImplicitSample& b = fs[focus[1] + 1];
      const Vec3 c = a.grad.cross(b.grad);
      if (c.norm() > 1e-9 * a.grad.norm() * b.grad.norm()) {
        u = c.normalized();
      } else {
        const auto* oa = std::get_if<Obstacle>(&ws.obstacles[focus[0]]);
        const auto* ob = std::get_if<Obstacle>(&ws.obstacles[focus[1]]);
        Vec3 v = Vec3::Zero();
        if (oa && ob && oa->is_cylinder() && ob->is_cylinder()) v = oa->axis_dir() + ob->axis_dir();
        u = v.norm() > 1e-12 ? Vec3(v.normalized()) : any_perpendicular(a.grad);
      }
      const double qa = 0.25 * gg.dot(a.grad) - gamma;
      const double qb = 0.25 * gg.dot(b.grad) - gamma;
      num = 2.0 * (std::abs(qa) * b.value + std::abs(qb) * a.value);
    }
    const double den = 0.5 * G.dot(gg) + gamma * u.dot(((1.0 - inv_k) * G * G.transpose() - H) * u);
    out.log_num = std::log(num) + 2.0 * log_bar;
    out.log_den = std::log(std::abs(den)) + 2.0 * log_bar;
    out.den_positive = den > 0.0;
    if (!(out.log_den >= std::log(cfg.exclude_abs))) out.excluded = true;
    return out;
  };

  const Halton3 halton(cfg.seed * 1000003ull + stream);
  const std::uint64_t budget = static_cast<std::uint64_t>(cfg.samples) * cfg.max_tries_factor;
  const std::uint64_t block = 4096;
  double min_num = kInf;
  double max_pos_den = -kInf;   // largest log|den| among positive denominators
  double min_neg_den = kInf;    // smallest log|den| among negative ones
  int accepted = 0, excluded = 0;
  std::vector<Sample> buf(block);
  for (std::uint64_t start = 0; start < budget && accepted < cfg.samples; start += block) {
    parallel_for(block, cfg.threads, [&](std::size_t i) {
      const Vec3 u = halton(start + i);
      buf[i] = eval_point(box.lo + u.cwiseProduct(box.hi - box.lo));
    });
    for (std::size_t i = 0; i < block && accepted < cfg.samples; ++i) {
      const Sample& s = buf[i];
      if (!s.accepted) continue;
      ++accepted;
      if (s.excluded) {
        ++excluded;
        continue;
      }
      min_num = std::min(min_num, s.log_num);
      if (s.den_positive) max_pos_den = std::max(max_pos_den, s.log_den);
      else min_neg_den = std::min(min_neg_den, s.log_den);
    }
  }
  if (accepted == 0) throw InputError("epsilon_bounds: shell of " + what + " is empty");
  est.samples = accepted;
  est.excluded = excluded;
  est.low_confidence = excluded > cfg.low_confidence_ratio * accepted;
  if (accepted < cfg.samples) {
    est.note = "only " + std::to_string(accepted) + " shell samples found";
    est.low_confidence = true;
  }
  if (max_pos_den > -kInf) {
    est.eps_doubleprime = std::exp(min_num - max_pos_den);
  } else {
    est.eps_doubleprime = kInf;
  }
  if (focus.size() == 1 && cfg.shell_scale >= 1.0) {
    if (!est.note.empty()) est.note += "; ";
    est.note += "the target lies on this shell, where Q vanishes, so the sampled minimum tends to 0";
  }
  return est;
}

}  // namespace

EpsilonBounds epsilon_bounds(const NavSpec& spec, const Workspace& ws,
                             const std::vector<std::pair<std::size_t, std::size_t>>& intersecting,
                             const ShellSampling& cfg) {
  check_nav_spec(spec, ws);
  if (cfg.samples < 1) throw InputError("epsilon_bounds: samples must be positive");
  if (!(cfg.shell_scale > 0.0)) throw InputError("epsilon_bounds: shell_scale must be positive");
  EpsilonBounds out;
  const double r0 = ws.outer_radius;
  out.boundary_grad_bound = 2.0 * r0;
  double grad_sum = out.boundary_grad_bound;
  double eps0 = kInf;
  std::uint64_t stream = 0;
  for (std::size_t i = 0; i < ws.obstacles.size(); ++i) {
    const Shape& s = ws.obstacles[i];
    const double eps_prime = shape_beta(s, spec.target);
    ObstacleEpsilon oe{i, sample_shell(spec, ws, {i}, eps_prime, cfg, stream++, "obstacle " + std::to_string(i)),
                       gradient_bound(s, r0)};
    if (is_merged(s)) {
      if (!oe.est.note.empty()) oe.est.note = "; " + oe.est.note;
      oe.est.note = "merged obstacle: eps' taken as beta(p_d) without a closed-form Q bound" + oe.est.note;
    }
    grad_sum += oe.grad_bound;
    eps0 = std::min({eps0, oe.est.eps_prime, oe.est.eps_doubleprime});
    out.per_obstacle.push_back(std::move(oe));
  }
  for (const auto& [i, j] : intersecting) {
    if (i >= ws.obstacles.size() || j >= ws.obstacles.size() || i == j) {
      throw InputError("epsilon_bounds: bad intersecting pair (" + std::to_string(i) + ", " + std::to_string(j) +
                       ")");
    }
    const double eps_prime = std::min(shape_beta(ws.obstacles[i], spec.target), shape_beta(ws.obstacles[j], spec.target));
    PairEpsilon pe{i, j,
                   sample_shell(spec, ws, {i, j}, eps_prime, cfg, stream++,
                                "pair (" + std::to_string(i) + ", " + std::to_string(j) + ")")};
    eps0 = std::min({eps0, pe.est.eps_prime, pe.est.eps_doubleprime});
    out.per_pair.push_back(std::move(pe));
  }
  out.eps0 = eps0;
  out.n_of_eps = n_of_eps(r0, spec.target, grad_sum, std::isinf(eps0) ? 0.0 : eps0);
  if (std::isinf(eps0)) out.n_of_eps = 1;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

using Json = nlohmann::ordered_json;

Json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

Json vec(const Vec3& v) { return Json::array({num(v.x()), num(v.y()), num(v.z())}); }

Json shell_json(const ShellEstimate& e) {
  Json j;
  j["eps_prime"] = num(e.eps_prime);
  j["eps_doubleprime"] = num(e.eps_doubleprime);
  j["samples"] = e.samples;
  j["excluded"] = e.excluded;
  j["low_confidence"] = e.low_confidence;
  if (!e.note.empty()) j["note"] = e.note;
  return j;
}

}  // namespace

std::string critical_report_json(const CriticalPointReport& r) {
  Json j;
  j["starts"] = r.starts;
  j["converged_starts"] = r.converged_starts;
  j["spurious_minima"] = r.spurious_minima();
  Json pts = Json::array();
  for (const CriticalPoint& p : r.points) {
    Json e;
    e["x"] = vec(p.x);
    e["class"] = std::string(to_string(p.cls));
    e["region"] = to_string(p.region);
    e["eigenvalues"] = vec(p.eigenvalues);
    e["grad_norm"] = num(p.grad_norm);
    e["log_grad_norm"] = num(p.log_grad_norm);
    e["hits"] = p.hits;
    pts.push_back(std::move(e));
  }
  j["points"] = std::move(pts);
  j["messages"] = r.messages;
  return j.dump(2);
}

std::string epsilon_report_json(const EpsilonBounds& b) {
  Json j;
  Json obs = Json::array();
  for (const ObstacleEpsilon& o : b.per_obstacle) {
    Json e = shell_json(o.est);
    e["index"] = o.index;
    e["grad_bound"] = num(o.grad_bound);
    obs.push_back(std::move(e));
  }
  Json pairs = Json::array();
  for (const PairEpsilon& p : b.per_pair) {
    Json e = shell_json(p.est);
    e["i"] = p.i;
    e["j"] = p.j;
    pairs.push_back(std::move(e));
  }
  j["per_obstacle"] = std::move(obs);
  j["per_pair"] = std::move(pairs);
  j["boundary_grad_bound"] = num(b.boundary_grad_bound);
  j["eps0"] = num(b.eps0);
  j["n_of_eps"] = b.n_of_eps;
  return j.dump(2);
}

}  // namespace navfield
