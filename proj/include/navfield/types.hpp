#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace navfield {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Thrown when a point is evaluated outside the domain of a potential
/// (inside an obstacle, or on a boundary where the function is singular).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown for malformed inputs: invalid obstacle parameters, bad scene files.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a file cannot be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

/// Builds a Vec3, rejecting NaN/Inf components.
inline Vec3 make_vec3(double x, double y, double z) {
  Vec3 v(x, y, z);
  if (!v.allFinite()) throw InputError("vector component is not finite");
  return v;
}

/// Any unit vector perpendicular to `v` (v need not be normalized, must be nonzero).
inline Vec3 any_perpendicular(const Vec3& v) {
  Vec3 a = v.cwiseAbs();
  Vec3 e = Vec3::UnitX();
  if (a.y() <= a.x() && a.y() <= a.z()) e = Vec3::UnitY();
  else if (a.z() <= a.x() && a.z() <= a.y()) e = Vec3::UnitZ();
  return v.cross(e).normalized();
}

}  // namespace navfield
