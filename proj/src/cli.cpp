#include "navfield/cli.hpp"

#include "navfield/analysis.hpp"
#include "navfield/sampling.hpp"
#include "navfield/scene.hpp"
#include "navfield/transform.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#ifndef NAVFIELD_VERSION
#define NAVFIELD_VERSION "0.0.0"
#endif

namespace navfield {

namespace fs = std::filesystem;

namespace {

using Json = nlohmann::ordered_json;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  f.close();
  if (!f) throw IoError("write failed: " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

unsigned resolve_threads(const std::optional<unsigned>& flag) {
  if (flag) return *flag;
  const char* env = std::getenv("NAVFIELD_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 0 || v > 4096) throw InputError(std::string("NAVFIELD_THREADS: not a thread count: ") + env);
  return static_cast<unsigned>(v);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Whitespace- or comma-separated "x y z" rows; '#' starts a comment.
std::vector<Vec3> read_points(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read points file " + path.string());
  std::vector<Vec3> pts;
  std::string line;
  for (int ln = 1; std::getline(in, line); ++ln) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    for (char& ch : line) {
      if (ch == ',') ch = ' ';
    }
    std::istringstream row(line);
    double x, y, z;
    if (!(row >> x)) continue;
    std::string extra;
    if (!(row >> y >> z) || (row >> extra)) {
      throw InputError(path.string() + ":" + std::to_string(ln) + ": expected three numbers");
    }
    pts.push_back(make_vec3(x, y, z));
  }
  return pts;
}

struct Axis {
  double lo, hi;
  int n;
};

// "x0:x1:nx,y0:y1:ny,z0:z1:nz"; n = 1 samples lo only.
std::vector<Vec3> parse_grid(const std::string& spec) {
  std::vector<Axis> axes;
  std::istringstream in(spec);
  std::string part;
  while (std::getline(in, part, ',')) {
    Axis a{};
    char c1 = 0, c2 = 0;
    std::istringstream p(part);
    std::string extra;
    if (!(p >> a.lo >> c1 >> a.hi >> c2 >> a.n) || c1 != ':' || c2 != ':' || (p >> extra) || a.n < 1 ||
        !std::isfinite(a.lo) || !std::isfinite(a.hi)) {
      throw InputError("--grid: bad axis '" + part + "' (expected lo:hi:n)");
    }
    axes.push_back(a);
  }
  if (axes.size() != 3) throw InputError("--grid: expected three axes");
  if (static_cast<double>(axes[0].n) * axes[1].n * axes[2].n > 1e8) throw InputError("--grid: too many points");
  auto at = [](const Axis& a, int i) { return a.n == 1 ? a.lo : a.lo + (a.hi - a.lo) * i / (a.n - 1); };
  std::vector<Vec3> pts;
  for (int i = 0; i < axes[0].n; ++i) {
    for (int j = 0; j < axes[1].n; ++j) {
      for (int k = 0; k < axes[2].n; ++k) pts.emplace_back(at(axes[0], i), at(axes[1], j), at(axes[2], k));
    }
  }
  return pts;
}

// Starts drawn from a seeded Halton sequence over the free space, away from the target.
std::vector<Vec3> random_starts(const Workspace& ws, const NavSpec& spec, double pos_tol, int n,
                                std::uint64_t seed) {
  const Halton3 h(seed);
  std::vector<Vec3> out;
  for (std::uint64_t i = 0; static_cast<int>(out.size()) < n; ++i) {
    if (i > 1000ULL * static_cast<std::uint64_t>(n) + 100000) throw InputError("no free space to draw starts from");
    const Vec3 x = unit_cube_to_ball(h(i), ws.outer_radius);
    if (min_beta(ws, x) > 1e-6 * ws.outer_radius * ws.outer_radius && (x - spec.target).norm() > 10.0 * pos_tol) {
      out.push_back(x);
    }
  }
  return out;
}

// Options shared by the scene-based subcommands.
struct SceneOpts {
  std::string scene;
  std::optional<int> k;
  std::optional<std::string> potential;
  std::uint64_t seed = 1;
  std::optional<unsigned> threads;
  std::string out;
  bool skip_validation = false;
};

void add_scene_opts(CLI::App* app, SceneOpts& o, bool out_required) {
  app->add_option("--scene", o.scene, "scene file (JSON)")->required();
  app->add_option("--k", o.k, "navigation exponent k")->check(CLI::Range(1, 100000));
  app->add_option("--potential", o.potential, "phi | psi | fhat")->check(CLI::IsMember({"phi", "psi", "fhat"}));
  app->add_option("--seed", o.seed, "seed for sampled quantities");
  app->add_option("--threads", o.threads, "worker threads (0 = all cores; default $NAVFIELD_THREADS or 1)");
  auto* out = app->add_option("--out", o.out, "output path");
  if (out_required) out->required();
  app->add_flag("--skip-validation", o.skip_validation, "do not validate the scene first");
}

struct Loaded {
  Scene scene;
  fs::path path;
  std::string hash;
  Json overrides = Json::object();
};

Loaded load(const SceneOpts& o, bool check_spec = true) {
  Loaded l;
  l.path = o.scene;
  l.hash = sha256_file(l.path);
  l.scene = load_scene(l.path);
  if (o.k) {
    l.scene.spec.k = *o.k;
    l.overrides["k"] = *o.k;
  }
  if (o.potential) {
    l.scene.spec.potential = potential_from_string(*o.potential);
    l.overrides["potential"] = *o.potential;
  }
  if (check_spec) check_nav_spec(l.scene.spec, l.scene.workspace);
  return l;
}

Json manifest(const std::string& command, const std::vector<std::string>& args, const Loaded& l,
              std::uint64_t seed, Json effective, const std::vector<std::string>& outputs) {
  Json m;
  m["tool"] = "navfield";
  m["version"] = tool_version();
  m["command"] = command;
  m["argv"] = std::vector<std::string>(args.begin() + 1, args.end());
  m["scene"] = {{"path", l.path.string()},
                {"absolute_path", fs::absolute(l.path).lexically_normal().string()},
                {"sha256", l.hash}};
  m["seed"] = seed;
  m["overrides"] = l.overrides;
  m["effective"] = std::move(effective);
  m["outputs"] = outputs;
  m["timestamp"] = utc_timestamp();
  return m;
}

fs::path sibling_manifest(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

Json spec_json(const NavSpec& s) {
  return {{"potential", std::string(to_string(s.potential))}, {"k", s.k}, {"target", vec_json(s.target)}};
}

void print_report(std::ostream& out, const ValidationReport& rep) {
  out << (rep.valid() ? "valid" : "invalid") << "\n";
  if (rep.triple_intersection_found) out << "triple intersection found\n";
  for (const auto& m : rep.messages) out << "error: " << m << "\n";
  for (const auto& w : rep.warnings) out << "warning: " << w << "\n";
  for (const auto& p : rep.pairs) {
    if (p.relation == PairRelation::Disjoint) continue;
    out << "pair " << p.i << " " << p.j << " " << to_string(p.relation);
    if (!p.note.empty()) out << " (" << p.note << ")";
    out << "\n";
  }
}

Json report_json(const ValidationReport& rep) {
  Json j;
  j["valid"] = rep.valid();
  j["triple_intersection"] = rep.triple_intersection_found;
  j["target_ok"] = rep.target_ok;
  j["messages"] = rep.messages;
  j["warnings"] = rep.warnings;
  Json pairs = Json::array();
  for (const auto& p : rep.pairs) {
    if (p.relation == PairRelation::Disjoint) continue;
    pairs.push_back({{"i", p.i}, {"j", p.j}, {"relation", std::string(to_string(p.relation))}, {"gap", p.gap},
                     {"note", p.note}});
  }
  j["pairs"] = std::move(pairs);
  return j;
}

// Validates unless skipped; an invalid scene is an input error for the analysis commands.
std::optional<ValidationReport> prevalidate(const SceneOpts& o, const Loaded& l, std::ostream& err) {
  if (o.skip_validation) return std::nullopt;
  ValidationReport rep = validate(l.scene.workspace, l.scene.spec);
  if (!rep.valid()) {
    std::ostringstream msg;
    for (const auto& m : rep.messages) msg << "\n  " << m;
    throw InputError("scene " + l.path.string() + " is invalid:" + msg.str());
  }
  for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
  return rep;
}

std::vector<std::pair<std::size_t, std::size_t>> intersecting_pairs(const std::optional<ValidationReport>& rep) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (!rep) return out;
  for (const auto& p : rep->pairs) {
    if (p.relation == PairRelation::AllowedIntersecting) out.emplace_back(p.i, p.j);
  }
  return out;
}

Workspace apply_merge(const std::string& mode, const Workspace& ws, const std::optional<ValidationReport>& rep,
                      double p) {
  if (mode == "none") return ws;
  if (mode == "all") return merge_all(ws, p);
  if (!rep) throw InputError("--merge intersecting needs validation (drop --skip-validation)");
  return merge_intersecting(ws, *rep, p);
}

// ---------------------------------------------------------------- commands

int cmd_validate(const SceneOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  Loaded l = load(o, false);
  const ValidationReport rep = validate(l.scene.workspace, l.scene.spec);
  for (const auto& w : l.scene.warnings) out << "warning: " << w << "\n";
  print_report(out, rep);
  if (!o.out.empty()) {
    write_file(o.out, report_json(rep).dump(2) + "\n");
    write_file(sibling_manifest(o.out),
               manifest("validate", args, l, o.seed, {{"spec", spec_json(l.scene.spec)}}, {fs::path(o.out).filename()})
                       .dump(2) +
                   "\n");
  }
  return rep.valid() ? kExitOk : kExitNegative;
}

struct SimOpts {
  std::optional<double> c, dt, t_max;
  std::optional<std::string> integrator;
  std::optional<std::string> starts_file;
  std::optional<int> n_starts;
  std::string merge = "none";
  double merge_p = 2.0;
};

int cmd_simulate(const SceneOpts& o, const SimOpts& so, const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err) {
  Loaded l = load(o);
  SimConfig& cfg = l.scene.sim;
  if (so.c) {
    cfg.damping_c = *so.c;
    l.overrides["c"] = *so.c;
  }
  if (so.dt) {
    cfg.dt = *so.dt;
    l.overrides["dt"] = *so.dt;
  }
  if (so.t_max) {
    cfg.t_max = *so.t_max;
    l.overrides["t_max"] = *so.t_max;
  }
  if (so.integrator) {
    cfg.integrator = integrator_from_string(*so.integrator);
    l.overrides["integrator"] = *so.integrator;
  }
  check_sim_config(cfg);
  if (so.merge != "none") l.overrides["merge"] = so.merge;

  const auto rep = prevalidate(o, l, err);
  const Workspace ws = apply_merge(so.merge, l.scene.workspace, rep, so.merge_p);

  std::vector<Vec3> starts = l.scene.starts;
  std::string source = "scene";
  if (so.starts_file) {
    starts = read_points(*so.starts_file);
    source = "file:" + *so.starts_file;
    l.overrides["starts"] = *so.starts_file;
  } else if (so.n_starts) {
    starts = random_starts(ws, l.scene.spec, cfg.conv_pos_tol, *so.n_starts, o.seed);
    source = "halton";
    l.overrides["n_starts"] = *so.n_starts;
  }
  if (starts.empty()) throw InputError("no start positions (scene has none; use --starts or --n-starts)");

  const unsigned threads = resolve_threads(o.threads);
  const BatchResult res = simulate_batch(l.scene.spec, ws, cfg, starts, threads);

  const fs::path dir = o.out;
  make_dir(dir);
  std::vector<std::string> files;
  Json per_start = Json::array();
  for (std::size_t i = 0; i < res.trajectories.size(); ++i) {
    const Trajectory& tr = res.trajectories[i];
    char name[32];
    std::snprintf(name, sizeof name, "traj_%03zu.tsv", i);
    std::string text = "t\tx\ty\tz\tvx\tvy\tvz\tax\tay\taz\tfield\n";
    for (const TrajectorySample& s : tr.samples) {
      text += num(s.t);
      for (const Vec3* v : {&s.x, &s.v, &s.a}) {
        for (int d = 0; d < 3; ++d) text += "\t" + num((*v)[d]);
      }
      text += "\t" + num(s.field_value) + "\n";
    }
    write_file(dir / name, text);
    files.emplace_back(name);

    Json row;
    row["index"] = i;
    row["file"] = name;
    row["start"] = vec_json(starts[i]);
    if (!res.errors[i].empty()) {
      row["outcome"] = "invalid_start";
      row["error"] = res.errors[i];
    } else {
      row["outcome"] = std::string(to_string(tr.outcome));
      row["t_final"] = tr.t_final;
      row["max_speed"] = tr.max_speed;
      row["max_accel"] = tr.max_accel;
      if (tr.certified_minimum) row["certified_minimum"] = vec_json(*tr.certified_minimum);
    }
    per_start.push_back(std::move(row));
  }

  const BatchSummary& s = res.summary;
  std::vector<double> ttc;
  for (const auto& t : s.time_to_converge) {
    if (t) ttc.push_back(*t);
  }
  std::sort(ttc.begin(), ttc.end());
  Json summary;
  summary["starts"] = starts.size();
  summary["converged"] = s.converged;
  summary["local_minimum"] = s.local_minimum;
  summary["timeout"] = s.timeout;
  summary["collision"] = s.collision;
  summary["invalid_start"] = s.invalid_start;
  summary["max_speed"] = s.max_speed;
  summary["max_accel"] = s.max_accel;
  if (!ttc.empty()) {
    summary["median_time_to_converge"] = ttc[ttc.size() / 2];
    summary["max_time_to_converge"] = ttc.back();
  }
  summary["trajectories"] = std::move(per_start);
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  files.emplace_back("summary.json");

  Json eff;
  eff["spec"] = spec_json(l.scene.spec);
  eff["damping_c"] = cfg.damping_c;
  eff["dt"] = cfg.dt;
  eff["t_max"] = cfg.t_max;
  eff["conv_pos_tol"] = cfg.conv_pos_tol;
  eff["conv_speed_tol"] = cfg.conv_speed_tol;
  eff["integrator"] = std::string(to_string(cfg.integrator));
  eff["sample_stride"] = cfg.sample_stride;
  eff["stall_grad_tol"] = cfg.stall_grad_tol;
  eff["stall_steps"] = cfg.stall_steps;
  eff["certify_stalls"] = cfg.certify_stalls;
  eff["merge"] = so.merge;
  eff["merge_p"] = so.merge_p;
  eff["validated"] = !o.skip_validation;
  eff["starts"] = {{"source", source}, {"count", starts.size()}};
  eff["threads"] = threads;
  files.emplace_back("manifest.json");
  write_file(dir / "manifest.json", manifest("simulate", args, l, o.seed, std::move(eff), files).dump(2) + "\n");

  out << "converged " << s.converged << "/" << starts.size() << ", local_minimum " << s.local_minimum
      << ", timeout " << s.timeout << ", collision " << s.collision << ", invalid_start " << s.invalid_start << "\n";
  out << "max speed " << num(s.max_speed) << ", max accel " << num(s.max_accel) << "\n";
  if (!ttc.empty()) out << "time to converge: median " << num(ttc[ttc.size() / 2]) << ", max " << num(ttc.back()) << "\n";
  return s.converged == starts.size() ? kExitOk : kExitNegative;
}

struct FieldOpts {
  std::optional<std::string> grid;
  std::optional<std::string> points;
  std::string merge = "none";
};

int cmd_field(const SceneOpts& o, const FieldOpts& fo, const std::vector<std::string>& args, std::ostream& out,
              std::ostream& err) {
  Loaded l = load(o);
  if (fo.merge != "none") l.overrides["merge"] = fo.merge;
  std::optional<ValidationReport> rep;
  if (fo.merge == "intersecting") rep = prevalidate(o, l, err);
  const Workspace ws = apply_merge(fo.merge, l.scene.workspace, rep, 2.0);
  std::vector<Vec3> pts;
  if (fo.grid) pts = parse_grid(*fo.grid);
  if (fo.points) pts = read_points(*fo.points);

  const NavSpec& spec = l.scene.spec;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::string text = "x\ty\tz\tvalue\tgx\tgy\tgz\tstatus\n";
  std::size_t flagged = 0;
  for (const Vec3& x : pts) {
    double value = nan;
    Vec3 g = Vec3::Constant(nan);
    std::string status;
    const double mb = min_beta(ws, x);
    if (x.norm() > ws.outer_radius) {
      status = "outside_room";
    } else if (mb < 0.0) {
      status = "inside_obstacle";
    } else {
      try {
        const FieldPoint fp = potential(spec, ws, x);
        value = fp.value;
        if (mb > 0.0) g = fp.gradient;
      } catch (const DomainError&) {
      }
      status = mb > 0.0 ? "free" : "surface";
    }
    if (status != "free") ++flagged;
    text += num(x.x()) + "\t" + num(x.y()) + "\t" + num(x.z()) + "\t" + num(value) + "\t" + num(g.x()) + "\t" +
            num(g.y()) + "\t" + num(g.z()) + "\t" + status + "\n";
  }
  if (o.out.empty() || o.out == "-") {
    out << text;
  } else {
    write_file(o.out, text);
    Json eff{{"spec", spec_json(spec)}, {"merge", fo.merge}, {"points", pts.size()}};
    if (fo.grid) eff["grid"] = *fo.grid;
    if (fo.points) eff["points_file"] = *fo.points;
    write_file(sibling_manifest(o.out),
               manifest("field", args, l, o.seed, std::move(eff), {fs::path(o.out).filename()}).dump(2) + "\n");
    out << pts.size() << " points written to " << o.out << " (" << flagged << " not in free space)\n";
  }
  return kExitOk;
}

struct CriticalOpts {
  int n_starts = 500;
  std::optional<int> k_max;
  std::string merge = "none";
  bool no_epsilon = false;
  int shell_samples = 20000;
};

int cmd_critical(const SceneOpts& o, const CriticalOpts& co, const std::vector<std::string>& args,
                 std::ostream& out, std::ostream& err) {
  Loaded l = load(o);
  if (co.merge != "none") l.overrides["merge"] = co.merge;
  const auto rep = prevalidate(o, l, err);
  const Workspace ws = apply_merge(co.merge, l.scene.workspace, rep, 2.0);
  const unsigned threads = resolve_threads(o.threads);
  CriticalSearchOptions so;
  so.n_starts = co.n_starts;
  so.seed = o.seed;
  so.threads = threads;

  Json eff{{"spec", spec_json(l.scene.spec)}, {"n_starts", co.n_starts}, {"merge", co.merge}, {"threads", threads}};
  Json report;
  int code = kExitOk;
  if (co.k_max) {
    if (*co.k_max < l.scene.spec.k) throw InputError("--k-max must be at least k");
    const SweepResult sw = no_local_minima_sweep(l.scene.spec, ws, l.scene.spec.k, *co.k_max, so);
    Json rows = Json::array();
    for (const SweepRow& r : sw.rows) {
      out << "k " << r.k << ": " << r.spurious_minima << " spurious minima, " << r.critical_points
          << " critical points\n";
      rows.push_back({{"k", r.k}, {"spurious_minima", r.spurious_minima}, {"critical_points", r.critical_points}});
    }
    report["sweep"] = std::move(rows);
    report["threshold"] = sw.threshold ? Json(*sw.threshold) : Json(nullptr);
    out << "threshold: " << (sw.threshold ? std::to_string(*sw.threshold) : std::string("none in range")) << "\n";
    eff["k_max"] = *co.k_max;
    if (!sw.threshold) code = kExitNegative;
  } else {
    const CriticalPointReport cr = find_critical_points(l.scene.spec, ws, so);
    for (const CriticalPoint& p : cr.points) {
      out << to_string(p.cls) << " at (" << num(p.x.x()) << ", " << num(p.x.y()) << ", " << num(p.x.z()) << ") "
          << to_string(p.region) << ", eigenvalues " << num(p.eigenvalues[0]) << " " << num(p.eigenvalues[1]) << " "
          << num(p.eigenvalues[2]) << "\n";
    }
    out << cr.points.size() << " critical points, " << cr.spurious_minima() << " spurious minima ("
        << cr.converged_starts << "/" << cr.starts << " starts converged)\n";
    for (const auto& m : cr.messages) err << "note: " << m << "\n";
    report["critical"] = Json::parse(critical_report_json(cr));
    if (cr.spurious_minima() > 0) code = kExitNegative;
    if (!co.no_epsilon) {
      ShellSampling cfg;
      cfg.samples = co.shell_samples;
      cfg.seed = o.seed;
      cfg.threads = threads;
      const auto pairs = co.merge == "none" ? intersecting_pairs(rep) : std::vector<std::pair<std::size_t, std::size_t>>{};
      const EpsilonBounds eb = epsilon_bounds(l.scene.spec, ws, pairs, cfg);
      for (const ObstacleEpsilon& e : eb.per_obstacle) {
        out << "obstacle " << e.index << ": eps' " << num(e.est.eps_prime) << ", eps'' "
            << num(e.est.eps_doubleprime) << "\n";
      }
      for (const PairEpsilon& e : eb.per_pair) {
        out << "pair " << e.i << " " << e.j << ": eps' " << num(e.est.eps_prime) << ", eps'' "
            << num(e.est.eps_doubleprime) << "\n";
      }
      out << "eps0 " << num(eb.eps0) << ", N(eps0) " << eb.n_of_eps << "\n";
      report["epsilon"] = Json::parse(epsilon_report_json(eb));
      eff["shell_samples"] = co.shell_samples;
    }
  }
  if (!o.out.empty()) {
    write_file(o.out, report.dump(2) + "\n");
    write_file(sibling_manifest(o.out),
               manifest("critical", args, l, o.seed, std::move(eff), {fs::path(o.out).filename()}).dump(2) + "\n");
  }
  return code;
}

struct TransformCliOpts {
  double R = 0.0;
  std::string mode = "full";
  int surface_samples = 20000;
  int volume_samples = 50000;
};

int cmd_transform(const SceneOpts& o, const TransformCliOpts& to, const std::vector<std::string>& args,
                  std::ostream& out, std::ostream& err) {
  Loaded l = load(o);
  prevalidate(o, l, err);
  const ExpansionMode mode = expansion_mode_from_string(to.mode);
  TransformOptions opts;
  if (!o.skip_validation) opts.spec = l.scene.spec;
  opts.starts = l.scene.starts;
  opts.surface_samples = to.surface_samples;
  opts.volume_samples = to.volume_samples;
  opts.seed = o.seed;
  const TransformResult r = transform(l.scene.workspace, to.R, mode, {}, opts);

  for (const JointExpansion& j : r.joints) {
    out << "joint " << j.sphere_index << ": theta " << num(j.theta * 180.0 / M_PI) << " deg, factor "
        << num(j.factor) << ", radius " << num(j.base_radius) << " -> " << num(j.radius) << "\n";
  }
  out << "failure probability: surface " << num(r.p_fail_surface) << ", volume " << num(r.p_fail_volume) << "\n";
  for (const auto& w : r.warnings) err << "warning: " << w << "\n";
  for (const auto& v : r.violations) out << "violation: " << v << "\n";
  if (!r.valid()) {
    out << "transformed workspace is invalid; nothing written\n";
    return kExitNegative;
  }
  Scene res = l.scene;
  res.workspace = r.point_workspace;
  res.warnings.clear();
  write_file(o.out, serialize_scene(res));
  Json eff{{"spec", spec_json(l.scene.spec)},
           {"R", to.R},
           {"mode", std::string(to_string(mode))},
           {"surface_samples", to.surface_samples},
           {"volume_samples", to.volume_samples},
           {"p_fail_surface", r.p_fail_surface},
           {"p_fail_volume", r.p_fail_volume}};
  write_file(sibling_manifest(o.out),
             manifest("transform", args, l, o.seed, std::move(eff), {fs::path(o.out).filename()}).dump(2) + "\n");
  out << "wrote " << o.out << "\n";
  return kExitOk;
}

int cmd_rerun(const std::string& manifest_path, const std::optional<std::string>& new_out, std::ostream& out,
              std::ostream& err) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot read manifest " + manifest_path);
  Json m;
  try {
    m = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("manifest " + manifest_path + ": " + e.what());
  }
  if (!m.contains("argv") || !m["argv"].is_array() || !m.contains("scene")) {
    throw InputError("manifest " + manifest_path + ": missing argv or scene");
  }
  std::vector<std::string> args{"navfield"};
  for (const auto& a : m["argv"]) args.push_back(a.get<std::string>());
  const std::string scene = m["scene"].value("absolute_path", m["scene"].value("path", ""));
  const std::string want = m["scene"].value("sha256", "");
  if (sha256_file(scene) != want) throw InputError("scene " + scene + " changed since the manifest was written");
  for (std::size_t i = 1; i + 1 < args.size(); ++i) {
    if (args[i] == "--scene") args[i + 1] = scene;
    if (new_out && args[i] == "--out") args[i + 1] = *new_out;
  }
  return run_cli(args, out, err);
}

}  // namespace

const char* tool_version() { return NAVFIELD_VERSION; }

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 unavailable");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Polynomial navigation functions in 3-D spherical workspaces", "navfield"};
  app.set_version_flag("--version", std::string(tool_version()));
  app.require_subcommand(1);

  SceneOpts vo, so_, fo_, co_, to_;
  auto* validate_cmd = app.add_subcommand("validate", "check a scene; exit 1 if invalid");
  add_scene_opts(validate_cmd, vo, false);

  SimOpts sim;
  auto* sim_cmd = app.add_subcommand("simulate", "integrate trajectories from every start");
  add_scene_opts(sim_cmd, so_, true);
  sim_cmd->add_option("--c", sim.c, "damping coefficient")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--dt", sim.dt, "time step")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--t-max", sim.t_max, "time limit")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--integrator", sim.integrator, "semi_implicit_euler | rk4")
      ->check(CLI::IsMember({"semi_implicit_euler", "rk4"}));
  auto* sf = sim_cmd->add_option("--starts", sim.starts_file, "file of start positions (x y z per line)");
  sim_cmd->add_option("--n-starts", sim.n_starts, "draw this many starts from --seed instead")
      ->check(CLI::Range(1, 1000000))
      ->excludes(sf);
  sim_cmd->add_option("--merge", sim.merge, "none | intersecting | all")
      ->check(CLI::IsMember({"none", "intersecting", "all"}));
  sim_cmd->add_option("--merge-p", sim.merge_p, "Rvachev exponent for merging")->check(CLI::Range(1.0, 1e6));

  FieldOpts field;
  auto* field_cmd = app.add_subcommand("field", "sample the potential on a grid or at listed points");
  add_scene_opts(field_cmd, fo_, false);
  auto* g = field_cmd->add_option("--grid", field.grid, "x0:x1:nx,y0:y1:ny,z0:z1:nz");
  auto* p = field_cmd->add_option("--points", field.points, "file of points (x y z per line)");
  g->excludes(p);
  field_cmd->add_option("--merge", field.merge, "none | intersecting | all")
      ->check(CLI::IsMember({"none", "intersecting", "all"}));

  CriticalOpts crit;
  auto* crit_cmd = app.add_subcommand("critical", "find and classify critical points; epsilon bounds");
  add_scene_opts(crit_cmd, co_, false);
  crit_cmd->add_option("--n-starts", crit.n_starts, "search starts")->check(CLI::Range(1, 10000000));
  crit_cmd->add_option("--k-max", crit.k_max, "sweep k from --k (or the scene's k) to this value");
  crit_cmd->add_option("--merge", crit.merge, "none | intersecting | all")
      ->check(CLI::IsMember({"none", "intersecting", "all"}));
  crit_cmd->add_flag("--no-epsilon", crit.no_epsilon, "skip the epsilon bounds");
  crit_cmd->add_option("--shell-samples", crit.shell_samples, "samples per epsilon shell")
      ->check(CLI::Range(1, 100000000));

  TransformCliOpts tr;
  auto* tr_cmd = app.add_subcommand("transform", "spherical robot of radius R to point robot");
  add_scene_opts(tr_cmd, to_, true);
  tr_cmd->add_option("--R", tr.R, "robot radius")->required()->check(CLI::NonNegativeNumber);
  tr_cmd->add_option("--mode", tr.mode, "full | minimal")
      ->check(CLI::IsMember({"full", "minimal", "full_enclosure", "minimal_evolute"}));
  tr_cmd->add_option("--surface-samples", tr.surface_samples)->check(CLI::Range(1, 100000000));
  tr_cmd->add_option("--volume-samples", tr.volume_samples)->check(CLI::Range(1, 100000000));

  std::string manifest_path;
  std::optional<std::string> rerun_out;
  auto* rerun_cmd = app.add_subcommand("rerun", "repeat the run recorded in a manifest");
  rerun_cmd->add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required();
  rerun_cmd->add_option("--out", rerun_out, "write to this path instead");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*validate_cmd) return cmd_validate(vo, args, out);
    if (*sim_cmd) return cmd_simulate(so_, sim, args, out, err);
    if (*field_cmd) {
      if (!field.grid && !field.points) throw InputError("field: give --grid or --points");
      return cmd_field(fo_, field, args, out, err);
    }
    if (*crit_cmd) return cmd_critical(co_, crit, args, out, err);
    if (*tr_cmd) return cmd_transform(to_, tr, args, out, err);
    if (*rerun_cmd) return cmd_rerun(manifest_path, rerun_out, out, err);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitInput;
}

}  // namespace navfield
