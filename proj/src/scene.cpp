#include "navfield/scene.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>
#include <limits>
#include <set>
#include <sstream>

namespace navfield {

using Json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------- parsing

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw InputError("scene: " + (path.empty() ? what : path + ": " + what));
}

void check_keys(const Json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      fail(path.empty() ? key : path + "." + key, "unknown field");
    }
  }
}

const Json& require(const Json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(path.empty() ? key : path + "." + key, "missing required field");
  return *it;
}

std::string sub(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }
std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

double positive(const Json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0.0)) fail(path, "must be positive");
  return v;
}

long long integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<long long>();
}

Vec3 vec3(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected an array of 3 numbers");
  return Vec3(number(j[0], at(path, 0)), number(j[1], at(path, 1)), number(j[2], at(path, 2)));
}

std::string text(const Json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

template <class F>
auto wrap(const std::string& path, F&& make) {
  try {
    return make();
  } catch (const InputError& e) {
    fail(path, e.what());
  }
}

Obstacle parse_primitive(const Json& j, const std::string& path, std::vector<std::string>& warnings) {
  if (!j.is_object()) fail(path, "expected an object");
  const std::string type = text(require(j, path, "type"), sub(path, "type"));
  if (type == "sphere") {
    check_keys(j, path, {"type", "center", "radius"});
    const Vec3 c = vec3(require(j, path, "center"), sub(path, "center"));
    const double r = positive(require(j, path, "radius"), sub(path, "radius"));
    return wrap(path, [&] { return Obstacle::sphere(c, r); });
  }
  if (type == "full_cylinder") {
    check_keys(j, path, {"type", "point", "direction", "radius"});
    const Vec3 p = vec3(require(j, path, "point"), sub(path, "point"));
    const Vec3 d = vec3(require(j, path, "direction"), sub(path, "direction"));
    const double r = positive(require(j, path, "radius"), sub(path, "radius"));
    Obstacle ob = wrap(path, [&] { return Obstacle::full_cylinder(p, d, r); });
    if (ob.axis_dir() != d) warnings.push_back(sub(path, "direction") + ": normalized to unit length");
    return ob;
  }
  if (type == "capped_cylinder") {
    check_keys(j, path, {"type", "p1", "p2", "radius"});
    const Vec3 a = vec3(require(j, path, "p1"), sub(path, "p1"));
    const Vec3 b = vec3(require(j, path, "p2"), sub(path, "p2"));
    const double r = positive(require(j, path, "radius"), sub(path, "radius"));
    return wrap(path, [&] { return Obstacle::capped_cylinder(a, b, r); });
  }
  fail(sub(path, "type"), "unknown obstacle type '" + type +
                              "' (expected sphere, full_cylinder, capped_cylinder, merged or ball_joint)");
}

void parse_sim(const Json& j, const std::string& path, SimConfig& cfg) {
  check_keys(j, path,
             {"dt", "t_max", "conv_pos_tol", "conv_speed_tol", "integrator", "sample_stride",
              "stall_grad_tol", "stall_steps", "certify_stalls"});
  if (j.contains("dt")) cfg.dt = positive(j["dt"], sub(path, "dt"));
  if (j.contains("t_max")) cfg.t_max = positive(j["t_max"], sub(path, "t_max"));
  if (j.contains("conv_pos_tol")) cfg.conv_pos_tol = positive(j["conv_pos_tol"], sub(path, "conv_pos_tol"));
  if (j.contains("conv_speed_tol")) {
    cfg.conv_speed_tol = positive(j["conv_speed_tol"], sub(path, "conv_speed_tol"));
  }
  if (j.contains("stall_grad_tol")) {
    cfg.stall_grad_tol = positive(j["stall_grad_tol"], sub(path, "stall_grad_tol"));
  }
  if (j.contains("integrator")) {
    const std::string name = text(j["integrator"], sub(path, "integrator"));
    cfg.integrator = wrap(sub(path, "integrator"), [&] { return integrator_from_string(name); });
  }
  if (j.contains("sample_stride")) {
    const long long s = integer(j["sample_stride"], sub(path, "sample_stride"));
    if (s < 1 || s > 1'000'000'000) fail(sub(path, "sample_stride"), "must be a positive integer");
    cfg.sample_stride = static_cast<int>(s);
  }
  if (j.contains("stall_steps")) {
    const long long s = integer(j["stall_steps"], sub(path, "stall_steps"));
    if (s < 1 || s > 1'000'000'000) fail(sub(path, "stall_steps"), "must be a positive integer");
    cfg.stall_steps = static_cast<int>(s);
  }
  if (j.contains("certify_stalls")) {
    if (!j["certify_stalls"].is_boolean()) fail(sub(path, "certify_stalls"), "must be true or false");
    cfg.certify_stalls = j["certify_stalls"].get<bool>();
  }
}

std::string syntax_error(std::string_view src, const nlohmann::json::parse_error& e) {
  std::size_t line = 1;
  std::size_t col = 1;
  const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, src.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (src[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  std::string msg = e.what();
  // Drop nlohmann's "[json.exception.parse_error.101] parse error at line x, column y: " prefix.
  if (auto pos = msg.find(": "); pos != std::string::npos) {
    if (auto pos2 = msg.find(": ", pos + 2); pos2 != std::string::npos) msg = msg.substr(pos2 + 2);
  }
  return "scene: syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg;
}

// ------------------------------------------------------------ serializing

Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json to_json(const Obstacle& ob) {
  Json j;
  j["type"] = std::string(to_string(ob.kind()));
  switch (ob.kind()) {
    case ObstacleKind::Sphere:
      j["center"] = to_json(ob.center());
      break;
    case ObstacleKind::FullCylinder:
      j["point"] = to_json(ob.axis_point());
      j["direction"] = to_json(ob.axis_dir());
      break;
    case ObstacleKind::CappedCylinder:
      j["p1"] = to_json(ob.p1());
      j["p2"] = to_json(ob.p2());
      break;
    case ObstacleKind::WorkspaceBoundary:
      throw InputError("the workspace boundary is not a scene obstacle");
  }
  j["radius"] = ob.radius();
  return j;
}

}  // namespace

Scene parse_scene(std::string_view src) {
  Json root;
  try {
    root = Json::parse(src.begin(), src.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(syntax_error(src, e));
  }
  check_keys(root, "",
             {"version", "name", "outer_radius", "target", "potential", "k", "damping_c", "sim", "obstacles",
              "starts"});

  const long long version = integer(require(root, "", "version"), "version");
  if (version != kSceneFormatVersion) {
    fail("version", "unsupported version " + std::to_string(version) + " (supported: " +
                        std::to_string(kSceneFormatVersion) + ")");
  }

  Scene scene;
  if (root.contains("name")) scene.name = text(root["name"], "name");
  scene.workspace.outer_radius = positive(require(root, "", "outer_radius"), "outer_radius");
  scene.spec.target = vec3(require(root, "", "target"), "target");
  if (root.contains("potential")) {
    const std::string name = text(root["potential"], "potential");
    scene.spec.potential = wrap("potential", [&] { return potential_from_string(name); });
  }
  if (root.contains("k")) {
    const long long k = integer(root["k"], "k");
    if (k < 1 || k > 100000) fail("k", "must be an integer in [1, 100000]");
    scene.spec.k = static_cast<int>(k);
  }
  if (root.contains("damping_c")) scene.sim.damping_c = positive(root["damping_c"], "damping_c");
  if (root.contains("sim")) parse_sim(root["sim"], "sim", scene.sim);
  wrap("sim", [&] {
    check_sim_config(scene.sim);
    return 0;
  });

  auto& obstacles = scene.workspace.obstacles;
  if (root.contains("obstacles")) {
    const Json& list = root["obstacles"];
    if (!list.is_array()) fail("obstacles", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Json& o = list[i];
      const std::string path = at("obstacles", i);
      if (!o.is_object()) fail(path, "expected an object");
      const std::string type = text(require(o, path, "type"), sub(path, "type"));
      if (type == "merged") {
        check_keys(o, path, {"type", "members", "p"});
        const Json& mem = require(o, path, "members");
        if (!mem.is_array() || mem.size() < 2) fail(sub(path, "members"), "expected an array of at least 2 obstacles");
        std::vector<Obstacle> members;
        for (std::size_t m = 0; m < mem.size(); ++m) {
          members.push_back(parse_primitive(mem[m], at(sub(path, "members"), m), scene.warnings));
        }
        const double p = o.contains("p") ? number(o["p"], sub(path, "p")) : 2.0;
        obstacles.emplace_back(wrap(path, [&] { return MergedObstacle(std::move(members), p); }));
      } else if (type == "ball_joint") {
        check_keys(o, path, {"type", "center", "radius", "members"});
        const Vec3 c = vec3(require(o, path, "center"), sub(path, "center"));
        const double r = positive(require(o, path, "radius"), sub(path, "radius"));
        const Json& mem = require(o, path, "members");
        if (!mem.is_array() || mem.size() < 2) fail(sub(path, "members"), "expected at least 2 member indices");
        JointDecl joint{obstacles.size(), {}};
        for (std::size_t m = 0; m < mem.size(); ++m) {
          const long long idx = integer(mem[m], at(sub(path, "members"), m));
          if (idx < 0) fail(at(sub(path, "members"), m), "index must be nonnegative");
          joint.members.push_back(static_cast<std::size_t>(idx));
        }
        obstacles.emplace_back(wrap(path, [&] { return Obstacle::sphere(c, r); }));
        scene.workspace.joints.push_back(std::move(joint));
      } else {
        obstacles.emplace_back(parse_primitive(o, path, scene.warnings));
      }
    }
  }

  for (std::size_t jn = 0; jn < scene.workspace.joints.size(); ++jn) {
    const JointDecl& joint = scene.workspace.joints[jn];
    const std::string path = at("obstacles", joint.sphere_index) + ".members";
    std::set<std::size_t> seen;
    for (std::size_t m = 0; m < joint.members.size(); ++m) {
      const std::size_t idx = joint.members[m];
      if (idx >= obstacles.size()) fail(at(path, m), "index out of range");
      if (idx == joint.sphere_index) fail(at(path, m), "a joint cannot be its own member");
      if (!seen.insert(idx).second) fail(at(path, m), "duplicate member");
      const auto* ob = std::get_if<Obstacle>(&obstacles[idx]);
      if (ob == nullptr || !ob->is_cylinder()) fail(at(path, m), "joint members must be cylinders");
    }
  }

  if (root.contains("starts")) {
    const Json& list = root["starts"];
    if (!list.is_array()) fail("starts", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) scene.starts.push_back(vec3(list[i], at("starts", i)));
  }
  return scene;
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read scene file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scene(buf.str());
}

std::string serialize_scene(const Scene& scene) {
  Json root;
  root["version"] = kSceneFormatVersion;
  if (!scene.name.empty()) root["name"] = scene.name;
  root["outer_radius"] = scene.workspace.outer_radius;
  root["target"] = to_json(scene.spec.target);
  root["potential"] = std::string(to_string(scene.spec.potential));
  root["k"] = scene.spec.k;
  root["damping_c"] = scene.sim.damping_c;
  const SimConfig& s = scene.sim;
  root["sim"] = Json{{"dt", s.dt},
                     {"t_max", s.t_max},
                     {"conv_pos_tol", s.conv_pos_tol},
                     {"conv_speed_tol", s.conv_speed_tol},
                     {"integrator", std::string(to_string(s.integrator))},
                     {"sample_stride", s.sample_stride},
                     {"stall_grad_tol", s.stall_grad_tol},
                     {"stall_steps", s.stall_steps},
                     {"certify_stalls", s.certify_stalls}};

  Json list = Json::array();
  const auto& obstacles = scene.workspace.obstacles;
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    auto joint = std::find_if(scene.workspace.joints.begin(), scene.workspace.joints.end(),
                              [&](const JointDecl& j) { return j.sphere_index == i; });
    if (joint != scene.workspace.joints.end()) {
      const Obstacle& sph = std::get<Obstacle>(obstacles[i]);
      Json j;
      j["type"] = "ball_joint";
      j["center"] = to_json(sph.center());
      j["radius"] = sph.radius();
      j["members"] = joint->members;
      list.push_back(std::move(j));
    } else if (const auto* ob = std::get_if<Obstacle>(&obstacles[i])) {
      list.push_back(to_json(*ob));
    } else {
      const auto& m = std::get<MergedObstacle>(obstacles[i]);
      Json j;
      j["type"] = "merged";
      j["p"] = m.p();
      Json members = Json::array();
      for (const Obstacle& ob : m.members()) members.push_back(to_json(ob));
      j["members"] = std::move(members);
      list.push_back(std::move(j));
    }
  }
  root["obstacles"] = std::move(list);

  Json starts = Json::array();
  for (const Vec3& p : scene.starts) starts.push_back(to_json(p));
  root["starts"] = std::move(starts);
  return root.dump(2) + "\n";
}

// ------------------------------------------------------------- validation

std::string_view to_string(PairRelation r) {
  switch (r) {
    case PairRelation::Disjoint: return "disjoint";
    case PairRelation::AllowedIntersecting: return "allowed_intersecting";
    case PairRelation::Tangent: return "tangent";
    case PairRelation::Forbidden: return "forbidden";
  }
  return "unknown";
}

namespace {

const std::vector<Obstacle>& primitives(const Shape& s, std::vector<Obstacle>& scratch) {
  if (const auto* m = std::get_if<MergedObstacle>(&s)) return m->members();
  scratch.assign(1, std::get<Obstacle>(s));
  return scratch;
}

double min_radius(const Shape& s) {
  std::vector<Obstacle> scratch;
  double r = std::numeric_limits<double>::infinity();
  for (const Obstacle& ob : primitives(s, scratch)) r = std::min(r, ob.radius());
  return r;
}

// Core distance minus both radii, minimized over member pairs.
double shape_gap(const Shape& a, const Shape& b, double r0) {
  std::vector<Obstacle> sa, sb;
  double gap = std::numeric_limits<double>::infinity();
  for (const Obstacle& p : primitives(a, sa)) {
    for (const Obstacle& q : primitives(b, sb)) {
      const double d = segment_segment_closest(core_segment(p, r0), core_segment(q, r0)).distance;
      gap = std::min(gap, d - p.radius() - q.radius());
    }
  }
  return gap;
}

// Scan lines on the surface of `ob`. `point(u, v)` maps line index u and
// parameter v in [0, 1] to a surface point.
template <class Point, class Emit>
void scan_surface(int lines, int steps, Point&& point, const Shape& other, Emit&& emit, double v0 = 0.0,
                  double v1 = 1.0) {
  for (int u = 0; u < lines; ++u) {
    const double phi = 2.0 * std::numbers::pi * (u + 0.5) / lines;
    double v_prev = v0;
    double f_prev = shape_beta(other, point(phi, v0));
    for (int s = 1; s <= steps; ++s) {
      const double v = v0 + (v1 - v0) * static_cast<double>(s) / steps;
      const double f = shape_beta(other, point(phi, v));
      if (f_prev == 0.0) {
        emit(point(phi, v_prev));
      } else if ((f_prev < 0.0) != (f < 0.0) && f != 0.0) {
        // Illinois false position; the bracket shrinks to ~1e-13 of the step.
        double lo = v_prev, hi = v, flo = f_prev, fhi = f;
        int side = 0;
        double mid = 0.5 * (lo + hi);
        for (int it = 0; it < 60 && hi - lo > 1e-13 * (v1 - v0); ++it) {
          mid = (lo * fhi - hi * flo) / (fhi - flo);
          if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
          const double fm = shape_beta(other, point(phi, mid));
          if (fm == 0.0) break;
          if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
            if (side == -1) fhi *= 0.5;
            side = -1;
          } else {
            hi = mid;
            fhi = fm;
            if (side == 1) flo *= 0.5;
            side = 1;
          }
        }
        emit(point(phi, mid));
      }
      v_prev = v;
      f_prev = f;
    }
  }
}

void curve_on(const Shape& owner, const Shape& other, double r0, int lines, double step,
              std::vector<Vec3>& out) {
  std::vector<Obstacle> scratch;
  const double tol = 1e-9 * r0 * r0;
  auto emit = [&](const Vec3& x) {
    if (x.norm() > r0) return;
    if (is_merged(owner) && std::abs(shape_beta(owner, x)) > tol) return;
    out.push_back(x);
  };
  auto steps_for = [&](double length) {
    return std::clamp(static_cast<int>(std::ceil(length / step)), 64, 4000);
  };

  for (const Obstacle& ob : primitives(owner, scratch)) {
    const double r = ob.radius();
    const Vec3 axis = ob.is_cylinder() ? ob.axis_dir() : Vec3::UnitZ();
    const Vec3 e1 = any_perpendicular(axis);
    const Vec3 e2 = axis.cross(e1);
    auto ring = [&](double phi) -> Vec3 { return std::cos(phi) * e1 + std::sin(phi) * e2; };

    if (ob.kind() == ObstacleKind::Sphere) {
      const Vec3 c = ob.center();
      scan_surface(lines, steps_for(std::numbers::pi * r),
                   [&](double phi, double v) {
                     const double th = std::numbers::pi * v;
                     return Vec3(c + r * (std::sin(th) * ring(phi) + std::cos(th) * axis));
                   },
                   other, emit);
      continue;
    }

    Vec3 base;
    double len;
    if (ob.kind() == ObstacleKind::FullCylinder) {
      const Vec3 foot = ob.axis_point() - axis.dot(ob.axis_point()) * axis;
      len = 2.0 * (r0 + r);
      base = foot - 0.5 * len * axis;
    } else {
      base = ob.p1();
      len = (ob.p2() - ob.p1()).norm();
    }
    // Only the stretch of the tube that faces the other shape can meet it.
    double t0 = 0.0, t1 = len;
    std::vector<Obstacle> other_scratch;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const Obstacle& q : primitives(other, other_scratch)) {
      if (q.kind() == ObstacleKind::FullCylinder && std::abs(q.axis_dir().dot(axis)) > 1e-12) {
        lo = -lo;
        hi = -hi;
        break;
      }
      const Segment core = core_segment(q, r0);
      for (const Vec3& e : {core.a, core.b}) {
        const double t = (e - base).dot(axis);
        lo = std::min(lo, t - q.radius());
        hi = std::max(hi, t + q.radius());
      }
    }
    t0 = std::max(t0, lo - step);
    t1 = std::min(t1, hi + step);
    if (t1 > t0) {
      scan_surface(lines, steps_for(t1 - t0),
                   [&](double phi, double v) { return Vec3(base + v * len * axis + r * ring(phi)); }, other,
                   emit, t0 / len, t1 / len);
    }
    if (ob.kind() == ObstacleKind::CappedCylinder) {
      for (int side = 0; side < 2; ++side) {
        const Vec3 c = side == 0 ? ob.p1() : ob.p2();
        if (c.norm() - r > r0) continue;
        bool near = false;
        for (const Obstacle& q : primitives(other, other_scratch)) {
          near = near || point_segment_distance(c, core_segment(q, r0)) < r + q.radius() + step;
        }
        if (!near) continue;
        const Vec3 out_dir = side == 0 ? Vec3(-axis) : axis;
        scan_surface(lines, steps_for(0.5 * std::numbers::pi * r),
                     [&](double phi, double v) {
                       const double th = 0.5 * std::numbers::pi * v;
                       return Vec3(c + r * (std::sin(th) * ring(phi) + std::cos(th) * out_dir));
                     },
                     other, emit);
      }
    }
  }
}

// Directions leaving the meeting point q along the axis: one ray when q is
// an endpoint of a capped axis, both directions otherwise.
std::vector<Vec3> axis_rays(const Obstacle& c, const Vec3& q, double tol) {
  if (c.kind() == ObstacleKind::CappedCylinder) {
    if ((q - c.p1()).norm() <= tol) return {c.axis_dir()};
    if ((q - c.p2()).norm() <= tol) return {Vec3(-c.axis_dir())};
  }
  return {c.axis_dir(), Vec3(-c.axis_dir())};
}

// Largest cosine between rays of two cylinders at q.
double max_ray_cos(const Obstacle& a, const Obstacle& b, const Vec3& q, double tol) {
  double m = -1.0;
  for (const Vec3& u : axis_rays(a, q, tol)) {
    for (const Vec3& v : axis_rays(b, q, tol)) m = std::max(m, u.dot(v));
  }
  return m;
}

// Equal radii, axes meeting at a point, and every pair of axis rays at that
// point at least 90 degrees apart. Perpendicular crossings and star-shaped
// junctions of half-cylinders both qualify.
bool cylinders_meet_rules(const Obstacle& a, const Obstacle& b, double r0, const ValidationOptions& opts,
                          std::string& why, Vec3* meet = nullptr) {
  std::vector<std::string> bad;
  const double tol = opts.axis_tol_rel * r0;
  if (std::abs(a.radius() - b.radius()) > opts.tol_tangent_rel * r0) bad.push_back("unequal radii");
  const SegmentPair sp = segment_segment_closest(core_segment(a, r0), core_segment(b, r0));
  const Vec3 q = 0.5 * (sp.on_first + sp.on_second);
  if (sp.distance > tol) {
    bad.push_back("axes do not intersect");
  } else if (max_ray_cos(a, b, q, tol) > opts.perpendicular_tol) {
    bad.push_back("axes meet at less than 90 degrees");
  }
  for (std::size_t i = 0; i < bad.size(); ++i) why += (i ? ", " : "") + bad[i];
  if (meet) *meet = q;
  return bad.empty();
}

// Three equal cylinders meeting at one point with all axis rays at least 90
// degrees apart need no ball joint; their common point is not a forbidden
// triple intersection.
bool open_junction(const Shape& sa, const Shape& sb, const Shape& sc, double r0, const ValidationOptions& opts) {
  const auto* a = std::get_if<Obstacle>(&sa);
  const auto* b = std::get_if<Obstacle>(&sb);
  const auto* c = std::get_if<Obstacle>(&sc);
  if (!a || !b || !c || !a->is_cylinder() || !b->is_cylinder() || !c->is_cylinder()) return false;
  std::string why;
  Vec3 q;
  if (!cylinders_meet_rules(*a, *b, r0, opts, why, &q)) return false;
  const double tol = opts.axis_tol_rel * r0;
  if (std::abs(c->radius() - a->radius()) > opts.tol_tangent_rel * r0) return false;
  if (point_segment_distance(q, core_segment(*c, r0)) > tol) return false;
  return max_ray_cos(*a, *c, q, tol) <= opts.perpendicular_tol && max_ray_cos(*b, *c, q, tol) <= opts.perpendicular_tol;
}

std::string pair_name(std::size_t i, std::size_t j) {
  return "obstacles " + std::to_string(i) + " and " + std::to_string(j);
}

}  // namespace

std::vector<Vec3> intersection_curve_samples(const Shape& a, const Shape& b, double outer_radius, int lines) {
  const double step = 0.1 * std::min(min_radius(a), min_radius(b));
  std::vector<Vec3> out;
  curve_on(a, b, outer_radius, lines, step, out);
  curve_on(b, a, outer_radius, lines, step, out);
  return out;
}

ValidationReport validate(const Workspace& ws, const NavSpec& spec, const ValidationOptions& opts) {
  ValidationReport rep;
  const double r0 = ws.outer_radius;
  const auto& obs = ws.obstacles;
  const std::size_t n = obs.size();
  const double tol_gap = opts.tol_tangent_rel * r0;
  const double warn_gap = opts.warn_tangent_rel * r0;
  const double tol_beta = 1e-9 * r0 * r0;

  // Per-obstacle checks: inside the room, not swallowing it, not touching it tangentially.
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Obstacle> scratch;
    for (const Obstacle& ob : primitives(obs[i], scratch)) {
      const Segment core = core_segment(ob, r0);
      const double d0 = point_segment_distance(Vec3::Zero(), core);
      if (d0 >= r0) rep.messages.push_back("obstacle " + std::to_string(i) + " lies outside the workspace");
      if (d0 + r0 <= ob.radius()) {
        rep.messages.push_back("obstacle " + std::to_string(i) + " contains the whole workspace");
      }
      if (ob.kind() != ObstacleKind::FullCylinder) {
        const double reach = std::max(core.a.norm(), core.b.norm()) + ob.radius();
        if (std::abs(reach - r0) <= tol_gap) {
          rep.messages.push_back("obstacle " + std::to_string(i) + " is tangent to the workspace boundary");
        }
      }
    }
  }

  // Target.
  if (!(beta(ws.boundary(), spec.target) > 0.0)) {
    rep.target_ok = false;
    rep.messages.push_back("target is not strictly inside the workspace boundary");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(shape_beta(obs[i], spec.target) > 0.0)) {
      rep.target_ok = false;
      rep.messages.push_back("obstacle " + std::to_string(i) + " contains the target");
    }
  }

  // Pairs.
  std::vector<std::pair<std::size_t, std::vector<Vec3>>> curves;  // pair index, curve samples
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      PairClassification pc{i, j, PairRelation::Disjoint, shape_gap(obs[i], obs[j], r0), {}};
      if (std::abs(pc.gap) <= tol_gap) {
        pc.relation = PairRelation::Tangent;
        rep.messages.push_back(pair_name(i, j) + " are tangent");
      } else if (pc.gap > 0.0) {
        if (pc.gap <= warn_gap) {
          rep.warnings.push_back(pair_name(i, j) + " are nearly tangent (gap " + std::to_string(pc.gap) + ")");
        } else if (pc.gap < opts.clearance_warn_rel * r0) {
          rep.warnings.push_back(pair_name(i, j) + " have small clearance (" + std::to_string(pc.gap) + ")");
        }
      } else {
        if (-pc.gap <= warn_gap) {
          rep.warnings.push_back(pair_name(i, j) + " barely overlap (gap " + std::to_string(pc.gap) + ")");
        }
        std::vector<Vec3> curve = intersection_curve_samples(obs[i], obs[j], r0, opts.curve_lines);
        pc.relation = PairRelation::AllowedIntersecting;
        const auto* a = std::get_if<Obstacle>(&obs[i]);
        const auto* b = std::get_if<Obstacle>(&obs[j]);
        std::string why;
        if (curve.empty()) {
          pc.note = "nested";
        } else if (a && b && a->is_cylinder() && b->is_cylinder() && !cylinders_meet_rules(*a, *b, r0, opts, why)) {
          // Still fine when the whole intersection curve sits inside another obstacle (a ball joint).
          std::optional<std::size_t> encloser;
          for (std::size_t k = 0; k < n && !encloser; ++k) {
            if (k == i || k == j) continue;
            const bool inside = std::all_of(curve.begin(), curve.end(),
                                            [&](const Vec3& x) { return shape_beta(obs[k], x) < -tol_beta; });
            if (inside) encloser = k;
          }
          if (encloser) {
            pc.note = "enclosed by obstacle " + std::to_string(*encloser);
          } else {
            pc.relation = PairRelation::Forbidden;
            pc.note = why;
            rep.messages.push_back("cylinder " + pair_name(i, j) + " intersect illegally: " + why);
          }
        }
        if (!curve.empty()) curves.emplace_back(rep.pairs.size(), std::move(curve));
      }
      rep.pairs.push_back(std::move(pc));
    }
  }

  // Triple intersections: a third obstacle whose surface crosses a pairwise
  // intersection curve where that crossing is exposed, i.e. not buried inside
  // a fourth obstacle such as a ball joint. A curve lying wholly inside the
  // third obstacle is an enclosure, not a crossing.
  // A primitive clear of either member never touches the curve.
  std::vector<double> gap(n * n, -1.0);
  for (const PairClassification& pc : rep.pairs) gap[pc.i * n + pc.j] = gap[pc.j * n + pc.i] = pc.gap;
  for (auto& [pidx, curve] : curves) {
    const PairClassification& pc = rep.pairs[pidx];
    std::vector<std::size_t> nearby;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == pc.i || k == pc.j) continue;
      const bool exact = !is_merged(obs[k]) && !is_merged(obs[pc.i]) && !is_merged(obs[pc.j]);
      if (!exact || (gap[k * n + pc.i] <= tol_gap && gap[k * n + pc.j] <= tol_gap)) nearby.push_back(k);
    }
    const double spacing =
        2.0 * std::numbers::pi * std::max(min_radius(obs[pc.i]), min_radius(obs[pc.j])) / opts.curve_lines;
    for (int pass = 0; pass < 2; ++pass) {
      // Per curve point: how many other obstacles contain it, and which one (if exactly one).
      const std::size_t m = curve.size();
      std::vector<int> containers(m, 0);
      std::vector<std::size_t> container(m, n);
      std::vector<double> values(m * n);
      std::vector<double> grads(m * n);
      for (std::size_t k : nearby) {
        for (std::size_t q = 0; q < m; ++q) {
          const ImplicitSample s = shape_sample(obs[k], curve[q], false);
          values[q * n + k] = s.value;
          grads[q * n + k] = s.grad.norm();
          if (s.value < -tol_beta) {
            ++containers[q];
            container[q] = k;
          }
        }
      }
      bool suspicious = false;
      std::optional<std::size_t> culprit;
      for (std::size_t k : nearby) {
        if (culprit) break;
        bool neg = false, pos = false, zero = false;
        for (std::size_t q = 0; q < m; ++q) {
          const double v = values[q * n + k];
          if (containers[q] == 0) {
            if (v <= tol_beta) zero = true;
            else pos = true;
            if (v < 4.0 * spacing * grads[q * n + k]) suspicious = true;
          } else if (containers[q] == 1 && container[q] == k) {
            neg = true;
          }
        }
        if ((zero || (neg && pos)) && !open_junction(obs[pc.i], obs[pc.j], obs[k], r0, opts)) culprit = k;
      }
      if (culprit) {
        rep.triple_intersection_found = true;
        rep.messages.push_back("triple intersection: " + pair_name(pc.i, pc.j) + " meet inside obstacle " +
                               std::to_string(*culprit));
        break;
      }
      if (!suspicious || pass == 1) break;
      curve = intersection_curve_samples(obs[pc.i], obs[pc.j], r0, opts.curve_lines * opts.refine_factor);
    }
  }
  return rep;
}

Workspace merge_intersecting(const Workspace& ws, const ValidationReport& report, double p,
                             std::vector<std::size_t>* index_map) {
  const std::size_t n = ws.obstacles.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const PairClassification& pc : report.pairs) {
    if (pc.relation != PairRelation::AllowedIntersecting || pc.i >= n || pc.j >= n) continue;
    parent[find(pc.i)] = find(pc.j);
  }

  Workspace out;
  out.outer_radius = ws.outer_radius;
  std::vector<std::size_t> map(n, 0);
  std::vector<std::size_t> group_of_root(n, n);
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (group_of_root[r] == n) {
      group_of_root[r] = groups.size();
      groups.emplace_back();
    }
    groups[group_of_root[r]].push_back(i);
    map[i] = group_of_root[r];
  }
  for (const auto& g : groups) {
    if (g.size() == 1) {
      out.obstacles.push_back(ws.obstacles[g.front()]);
      continue;
    }
    std::vector<Obstacle> members;
    for (std::size_t idx : g) {
      std::vector<Obstacle> scratch;
      for (const Obstacle& ob : primitives(ws.obstacles[idx], scratch)) members.push_back(ob);
    }
    out.obstacles.emplace_back(MergedObstacle(std::move(members), p));
  }
  for (const JointDecl& j : ws.joints) {
    if (groups[map[j.sphere_index]].size() != 1) continue;
    JointDecl nj{map[j.sphere_index], {}};
    bool ok = true;
    for (std::size_t m : j.members) {
      if (groups[map[m]].size() != 1) ok = false;
      nj.members.push_back(map[m]);
    }
    if (ok) out.joints.push_back(std::move(nj));
  }
  if (index_map) *index_map = std::move(map);
  return out;
}

Workspace merge_all(const Workspace& ws, double p) {
  Workspace out;
  out.outer_radius = ws.outer_radius;
  std::vector<Obstacle> members;
  for (const Shape& s : ws.obstacles) {
    std::vector<Obstacle> scratch;
    for (const Obstacle& ob : primitives(s, scratch)) members.push_back(ob);
  }
  if (!members.empty()) out.obstacles.emplace_back(MergedObstacle(std::move(members), p));
  return out;
}

}  // namespace navfield
