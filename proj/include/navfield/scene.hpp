#pragma once

#include "navfield/field.hpp"
#include "navfield/simulate.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace navfield {

inline constexpr int kSceneFormatVersion = 1;

/// Everything a scene file describes.
struct Scene {
  std::string name;
  Workspace workspace;
  NavSpec spec;
  SimConfig sim;
  std::vector<Vec3> starts;
  /// Non-fatal notes from parsing (e.g. an axis that had to be normalized).
  std::vector<std::string> warnings;
};

/// Parses the JSON scene format (see docs/scene-format.md). Throws InputError
/// with a line/column for syntax errors and a field path such as
/// `obstacles[3].radius` for semantic ones. Unknown fields are rejected.
Scene parse_scene(std::string_view text);
Scene load_scene(const std::filesystem::path& path);

/// Writes a scene in the same format; parse_scene(serialize_scene(s))
/// reproduces every numeric field bit for bit.
std::string serialize_scene(const Scene& scene);

enum class PairRelation { Disjoint, AllowedIntersecting, Tangent, Forbidden };

std::string_view to_string(PairRelation r);

struct PairClassification {
  std::size_t i;
  std::size_t j;
  PairRelation relation;
  double gap;  ///< core distance minus both radii (negative when overlapping)
  std::string note;
};

struct ValidationOptions {
  double tol_tangent_rel = 1e-9;   ///< tangency tolerance relative to r0
  double warn_tangent_rel = 1e-6;  ///< near-tangency warning band relative to r0
  double clearance_warn_rel = 1e-3;  ///< warn when 0 < gap < this * r0
  int curve_lines = 720;           ///< sample lines per surface patch for intersection curves
  int refine_factor = 8;
  double axis_tol_rel = 1e-6;      ///< intersecting-axes tolerance relative to r0
  double perpendicular_tol = 1e-6; ///< |cos| of the axis angle
};

struct ValidationReport {
  std::vector<PairClassification> pairs;
  bool triple_intersection_found = false;
  bool target_ok = true;
  /// Failures; non-empty exactly when the workspace is invalid.
  std::vector<std::string> messages;
  std::vector<std::string> warnings;

  bool valid() const { return messages.empty(); }
};

/// Pairwise classification plus the triple-intersection, target and
/// containment checks. Never throws for geometric problems; they are
/// reported in `messages`.
ValidationReport validate(const Workspace& ws, const NavSpec& spec, const ValidationOptions& opts = {});

/// Points on the intersection curve of two shapes' surfaces, found by
/// scanning sample lines on each surface for sign changes of the other
/// shape's implicit function. Only points inside the room are kept.
std::vector<Vec3> intersection_curve_samples(const Shape& a, const Shape& b, double outer_radius,
                                             int lines);

/// Replaces every connected group of AllowedIntersecting obstacles by one
/// MergedObstacle (members in index order, exponent `p`). Groups with a
/// single member are kept as they are. Joint declarations referring to
/// merged obstacles are dropped. `index_map[old] = new` is filled if given.
Workspace merge_intersecting(const Workspace& ws, const ValidationReport& report, double p = 2.0,
                             std::vector<std::size_t>* index_map = nullptr);

/// Replaces all obstacles by a single MergedObstacle over every primitive
/// member, in order.
Workspace merge_all(const Workspace& ws, double p = 2.0);

}  // namespace navfield
