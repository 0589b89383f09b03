#pragma once

#include "navfield/shape.hpp"

#include <cstddef>
#include <vector>

namespace navfield {

/// A ball joint declared in a scene: a sphere obstacle enclosing the
/// intersection of two or more cylinders.
struct JointDecl {
  std::size_t sphere_index;          ///< index into Workspace::obstacles
  std::vector<std::size_t> members;  ///< indices of the member cylinders

  bool operator==(const JointDecl&) const = default;
};

/// Spherical room of radius `outer_radius` centered at the origin, with
/// internal obstacles. Obstacle indices are 0-based into `obstacles`; the
/// boundary is not part of that list.
struct Workspace {
  double outer_radius = 1.0;
  std::vector<Shape> obstacles;
  std::vector<JointDecl> joints;

  Obstacle boundary() const { return Obstacle::boundary(outer_radius); }

  bool operator==(const Workspace&) const = default;
};

}  // namespace navfield
