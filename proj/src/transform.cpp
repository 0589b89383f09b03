#include "navfield/transform.hpp"

#include "navfield/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace navfield {

std::string_view to_string(ExpansionMode m) {
  return m == ExpansionMode::MinimalEvolute ? "minimal" : "full";
}

ExpansionMode expansion_mode_from_string(std::string_view name) {
  if (name == "full" || name == "full_enclosure") return ExpansionMode::FullEnclosure;
  if (name == "minimal" || name == "minimal_evolute") return ExpansionMode::MinimalEvolute;
  throw InputError("unknown expansion mode '" + std::string(name) + "' (expected full or minimal)");
}

BallJoint make_ball_joint(const Workspace& ws, const JointDecl& decl, double tol_rel) {
  const double tol = tol_rel * ws.outer_radius;
  const std::string where = "ball joint at obstacle " + std::to_string(decl.sphere_index);
  if (decl.sphere_index >= ws.obstacles.size()) throw InputError(where + ": index out of range");
  const auto* sphere = std::get_if<Obstacle>(&ws.obstacles[decl.sphere_index]);
  if (!sphere || sphere->kind() != ObstacleKind::Sphere) throw InputError(where + ": not a sphere");
  if (decl.members.size() < 2) throw InputError(where + ": needs at least two member cylinders");

  BallJoint j;
  j.sphere_index = decl.sphere_index;
  j.center = sphere->center();
  j.radius = sphere->radius();
  j.members = decl.members;
  std::vector<const Obstacle*> cyl;
  for (std::size_t m : decl.members) {
    const auto* ob = m < ws.obstacles.size() ? std::get_if<Obstacle>(&ws.obstacles[m]) : nullptr;
    if (!ob || !ob->is_cylinder()) throw InputError(where + ": member " + std::to_string(m) + " is not a cylinder");
    const Vec3 d = j.center - ob->axis_point();
    if ((d - d.dot(ob->axis_dir()) * ob->axis_dir()).norm() > tol) {
      throw InputError(where + ": axis of member " + std::to_string(m) + " misses the joint center");
    }
    if (!cyl.empty() && std::abs(ob->radius() - cyl.front()->radius()) > tol) {
      throw InputError(where + ": member radii differ");
    }
    cyl.push_back(ob);
  }
  j.theta = M_PI;
  for (std::size_t a = 0; a < cyl.size(); ++a) {
    for (std::size_t b = a + 1; b < cyl.size(); ++b) {
      const double s = std::min(1.0, cyl[a]->axis_dir().cross(cyl[b]->axis_dir()).norm());
      j.theta = std::min(j.theta, std::asin(s));
    }
  }
  if (!(j.theta > 0.0)) throw InputError(where + ": two member axes are parallel");
  return j;
}

std::vector<BallJoint> ball_joints(const Workspace& ws, double tol_rel) {
  std::vector<BallJoint> out;
  for (const JointDecl& d : ws.joints) out.push_back(make_ball_joint(ws, d, tol_rel));
  return out;
}

namespace {

void check_theta(double theta) {
  if (!(theta > 0.0 && theta <= M_PI)) throw InputError("joint angle must be in (0, pi]");
}

// sin^2(t/2) (2 - sin^2(t/2)) / (1 - sin^4(t/2)), with 1 - sin^2 taken as cos^2.
double containment_x(double theta) {
  const double s = std::pow(std::sin(0.5 * theta), 2);
  const double c = std::pow(std::cos(0.5 * theta), 2);
  return s * (2.0 - s) / (c * (1.0 + s));
}

}  // namespace

double joint_expansion_factor(double theta, ExpansionMode mode) {
  check_theta(theta);
  if (theta == M_PI) return 1.0;
  const double sh = std::sin(0.5 * theta);
  if (mode == ExpansionMode::FullEnclosure) return 1.0 / sh;
  const double s = sh * sh;
  return std::sqrt((s * s - s + 1.0) / (s * (1.0 + s)));
}

std::optional<double> evolute_containment_angle(double theta) {
  check_theta(theta);
  if (theta == M_PI) return 0.0;
  const double x = containment_x(theta);
  if (x > 1.0) return std::nullopt;
  return std::asin(std::sqrt(x));
}

double evolute_cubic(double h, double x) {
  // h^2 - 1 factored so that h near 1 keeps its relative accuracy.
  const double h2 = h * h, h4 = h2 * h2;
  const double hm = (h - 1.0) * (h + 1.0);
  return hm * (h2 + 1.0) * x * x * x + 3.0 * x * x - 3.0 * x + (1.0 - h4 / (hm * hm));
}

double evolute_joint_radius(double theta, double r_plus_R) {
  check_theta(theta);
  const double b = r_plus_R;
  if (theta == M_PI) return b;
  const double a = b / std::sin(0.5 * theta);
  if (auto phi = evolute_containment_angle(theta)) {
    return std::hypot(a * std::cos(*phi), b * std::sin(*phi));
  }
  const double x = containment_x(theta);
  return std::sqrt(a * a * (1.0 - x) + b * b * x);
}

namespace {

struct Member {
  std::size_t top;
  Obstacle ob;
};

std::vector<Member> flatten(const Workspace& ws) {
  std::vector<Member> out;
  for (std::size_t i = 0; i < ws.obstacles.size(); ++i) {
    if (const auto* ob = std::get_if<Obstacle>(&ws.obstacles[i])) {
      out.push_back({i, *ob});
    } else {
      for (const Obstacle& m : std::get<MergedObstacle>(ws.obstacles[i]).members()) out.push_back({i, m});
    }
  }
  return out;
}

double member_gap(const Obstacle& a, const Obstacle& b, double r0) {
  return segment_segment_closest(core_segment(a, r0), core_segment(b, r0)).distance - a.radius() - b.radius();
}

Shape grow(const Shape& s, double R) {
  if (const auto* ob = std::get_if<Obstacle>(&s)) return ob->with_radius(ob->radius() + R);
  const auto& m = std::get<MergedObstacle>(s);
  std::vector<Obstacle> members;
  for (const Obstacle& o : m.members()) members.push_back(o.with_radius(o.radius() + R));
  return MergedObstacle(std::move(members), m.p());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

TransformResult transform(const Workspace& ws, double R, ExpansionMode mode, const std::vector<BallJoint>& joints_in,
                          const TransformOptions& opts) {
  const double r0 = ws.outer_radius;
  if (!(R >= 0.0) || !std::isfinite(R)) throw InputError("robot radius must be nonnegative");
  if (R >= r0) throw InputError("robot radius must be smaller than the room radius");
  const std::vector<BallJoint> joints = joints_in.empty() ? ball_joints(ws) : joints_in;

  TransformResult res;
  res.expansion_mode = mode;
  res.robot_radius = R;
  for (const BallJoint& j : joints) {
    const double h = joint_expansion_factor(j.theta, mode);
    // A factor below one would shrink the joint under the plain R offset; keep R.
    res.joints.push_back({j.sphere_index, j.theta, h, j.radius, j.radius + std::max(h, 1.0) * R});
    if (h < 1.0 && R > 0.0) {
      res.warnings.push_back("ball joint at obstacle " + std::to_string(j.sphere_index) + ": expansion factor " +
                             fmt(h) + " < 1, the joint sphere is not needed (kept with the plain R offset)");
    }
  }
  if (R == 0.0) {
    res.point_workspace = ws;
    res.standard_workspace = ws;
    return res;
  }

  Workspace& std_ws = res.standard_workspace;
  std_ws.outer_radius = r0 - R;
  std_ws.joints = ws.joints;
  for (const Shape& s : ws.obstacles) std_ws.obstacles.push_back(grow(s, R));
  res.point_workspace = std_ws;
  for (const JointExpansion& je : res.joints) {
    const auto& sph = std::get<Obstacle>(ws.obstacles[je.sphere_index]);
    res.point_workspace.obstacles[je.sphere_index] = sph.with_radius(je.radius);
  }

  // Clearance rules on the original geometry.
  const double limit = 2.0 * R - opts.slack;
  std::set<std::pair<std::size_t, std::size_t>> joint_pairs;
  for (const BallJoint& j : joints) {
    std::vector<std::size_t> group = j.members;
    group.push_back(j.sphere_index);
    for (std::size_t a : group) {
      for (std::size_t b : group) {
        if (a < b) joint_pairs.insert({a, b});
      }
    }
  }
  const std::vector<Member> mem = flatten(ws);
  const std::size_t n = ws.obstacles.size();
  std::vector<std::vector<double>> gap(n, std::vector<double>(n, INFINITY));
  for (std::size_t a = 0; a < mem.size(); ++a) {
    for (std::size_t b = a + 1; b < mem.size(); ++b) {
      if (mem[a].top == mem[b].top) continue;
      const double g = member_gap(mem[a].ob, mem[b].ob, r0);
      auto [p, q] = std::minmax(mem[a].top, mem[b].top);
      gap[p][q] = std::min(gap[p][q], g);
      if (mem[a].ob.is_cylinder() && mem[b].ob.is_cylinder() && g >= 0.0 && g < limit &&
          !joint_pairs.count({p, q})) {
        res.violations.push_back("obstacles " + std::to_string(p) + " and " + std::to_string(q) +
                                 ": cylinders " + fmt(g) + " apart, closer than 2R = " + fmt(2.0 * R) +
                                 " and not at a common ball joint");
      }
    }
  }
  auto close = [&](std::size_t p, std::size_t q) {
    if (p > q) std::swap(p, q);
    return gap[p][q] < limit && !joint_pairs.count({p, q});
  };
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (!close(a, b)) continue;
      for (std::size_t c = b + 1; c < n; ++c) {
        if (close(a, c) && close(b, c)) {
          res.violations.push_back("obstacles " + std::to_string(a) + ", " + std::to_string(b) + ", " +
                                   std::to_string(c) + ": cluster with pairwise distances below 2R = " +
                                   fmt(2.0 * R));
        }
      }
    }
  }

  if (opts.spec) {
    const ValidationReport rep = validate(res.point_workspace, *opts.spec, opts.validation);
    for (const std::string& m : rep.messages) res.violations.push_back("transformed workspace: " + m);
  } else {
    res.warnings.push_back("transformed workspace not re-validated (no target given)");
  }

  for (std::size_t i = 0; i < opts.starts.size(); ++i) {
    const Vec3& s = opts.starts[i];
    if (!in_free_space(std_ws, s)) {
      res.warnings.push_back("start " + std::to_string(i) + " is within R of an obstacle or the wall");
    } else if (!in_free_space(res.point_workspace, s)) {
      res.warnings.push_back("start " + std::to_string(i) +
                             " lies inside an expanded ball joint; move it out first with an intermediate target");
    }
  }

  const FailureProbabilities fp = failure_probabilities(res, opts.surface_samples, opts.volume_samples, opts.seed);
  res.p_fail_surface = fp.surface;
  res.p_fail_volume = fp.volume;
  return res;
}

FailureProbabilities failure_probabilities(const TransformResult& result, int surface_samples, int volume_samples,
                                           std::uint64_t seed) {
  FailureProbabilities out;
  if (result.joints.empty() || result.robot_radius == 0.0) return out;
  if (surface_samples < 1 || volume_samples < 1) throw InputError("sample counts must be positive");
  const Workspace& ws = result.standard_workspace;
  const double r = ws.outer_radius;
  const double R = result.robot_radius;

  auto clear_of_obstacles = [&](const Vec3& x) {
    return std::all_of(ws.obstacles.begin(), ws.obstacles.end(),
                       [&](const Shape& s) { return shape_beta(s, x) > 0.0; });
  };
  int free_surface = 0;
  for (int i = 0; i < surface_samples; ++i) free_surface += clear_of_obstacles(r * fibonacci_sphere(i, surface_samples));
  int free_volume = 0;
  const Halton3 h(seed);
  for (int i = 0; i < volume_samples; ++i) free_volume += in_free_space(ws, unit_cube_to_ball(h(i), r));
  out.surface_area = 4.0 * M_PI * r * r * free_surface / surface_samples;
  out.free_volume = 4.0 / 3.0 * M_PI * r * r * r * free_volume / volume_samples;

  double area = 0.0, vol = 0.0;
  for (const JointExpansion& j : result.joints) {
    area += 4.0 * M_PI * j.radius * j.radius;
    vol += 4.0 / 3.0 * M_PI * std::max(0.0, std::pow(j.base_radius + j.factor * R, 3) - std::pow(j.base_radius + R, 3));
  }
  out.surface = out.surface_area > 0.0 ? std::clamp(area / out.surface_area, 0.0, 1.0) : 1.0;
  out.volume = out.free_volume > 0.0 ? std::clamp(vol / out.free_volume, 0.0, 1.0) : 1.0;
  return out;
}

}  // namespace navfield
