#pragma once

#include "navfield/geometry.hpp"
#include "navfield/merge.hpp"

#include <variant>

namespace navfield {

/// An internal obstacle of a workspace: a primitive or a Rvachev composite.
using Shape = std::variant<Obstacle, MergedObstacle>;

inline double shape_beta(const Shape& s, const Vec3& x) {
  if (const auto* ob = std::get_if<Obstacle>(&s)) return beta(*ob, x);
  return merged_beta(std::get<MergedObstacle>(s), x);
}

inline ImplicitSample shape_sample(const Shape& s, const Vec3& x, bool with_hessian) {
  if (const auto* ob = std::get_if<Obstacle>(&s)) {
    ImplicitSample out;
    out.value = beta(*ob, x);
    out.grad = beta_grad(*ob, x);
    if (with_hessian) out.hess = beta_hess(*ob, x);
    return out;
  }
  return merged_sample(std::get<MergedObstacle>(s), x, with_hessian);
}

inline bool is_merged(const Shape& s) { return std::holds_alternative<MergedObstacle>(s); }

}  // namespace navfield
