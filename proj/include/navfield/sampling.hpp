#pragma once

#include "navfield/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace navfield {

/// Radical inverse of `i` in `base` (van der Corput), in [0, 1).
inline double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

/// 3-D Halton sequence (bases 2, 3, 5) with a random Cranley-Patterson
/// shift drawn from `seed`. Points are in [0, 1)^3.
class Halton3 {
 public:
  explicit Halton3(std::uint64_t seed = 0) {
    if (seed != 0) {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      shift_ = Vec3(u(rng), u(rng), u(rng));
    }
  }

  Vec3 operator()(std::uint64_t i) const {
    Vec3 p(radical_inverse(i + 1, 2), radical_inverse(i + 1, 3), radical_inverse(i + 1, 5));
    p += shift_;
    for (int d = 0; d < 3; ++d) p[d] -= std::floor(p[d]);
    return p;
  }

 private:
  Vec3 shift_ = Vec3::Zero();
};

/// Point `i` of an n-point Fibonacci lattice on the unit sphere.
inline Vec3 fibonacci_sphere(std::uint64_t i, std::uint64_t n) {
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double a = golden * static_cast<double>(i);
  return {rho * std::cos(a), rho * std::sin(a), z};
}

/// Maps a point of [0,1)^3 to the ball of `radius` about the origin, uniform in volume.
inline Vec3 unit_cube_to_ball(const Vec3& u, double radius) {
  const double z = 2.0 * u.x() - 1.0;
  const double phi = 2.0 * M_PI * u.y();
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  return radius * std::cbrt(u.z()) * Vec3(rho * std::cos(phi), rho * std::sin(phi), z);
}

}  // namespace navfield
