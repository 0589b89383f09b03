#include "navfield/merge.hpp"

#include <algorithm>

namespace navfield {

namespace {

void require_exponent(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw InputError("Rvachev exponent p must be > 1");
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// std::pow with the small integer exponents of p = 2 done inline.
double powe(double x, double e) {
  if (e == 0.0) return 1.0;
  if (e == 1.0) return x;
  if (e == 2.0) return x * x;
  return std::pow(x, e);
}

// (|a|^p + |b|^p)^(1/p), scaled to avoid overflow for large p.
double p_norm(double a, double b, double p) {
  const double m = std::max(std::abs(a), std::abs(b));
  if (m == 0.0) return 0.0;
  const double u = std::abs(a) / m;
  const double w = std::abs(b) / m;
  const double s = powe(u, p) + powe(w, p);
  return m * (p == 2.0 ? std::sqrt(s) : std::pow(s, 1.0 / p));
}

}  // namespace

double rvachev_union(double a, double b, double p) {
  require_exponent(p);
  return a + b - p_norm(a, b, p);
}

RvachevPartials rvachev_partials(double a, double b, double p) {
  require_exponent(p);
  RvachevPartials r{};
  const double n = p_norm(a, b, p);
  r.value = a + b - n;
  if (n == 0.0) {
    // Both members vanish: first derivatives take their boundary limit,
    // curvature terms are undefined and dropped.
    r.da = r.db = 1.0;
    return r;
  }
  const double ua = std::abs(a) / n;
  const double ub = std::abs(b) / n;
  r.da = 1.0 - powe(ua, p - 1.0) * sign(a);
  r.db = 1.0 - powe(ub, p - 1.0) * sign(b);
  r.daa = -(p - 1.0) / n * powe(ua, p - 2.0) * powe(ub, p);
  r.dbb = -(p - 1.0) / n * powe(ub, p - 2.0) * powe(ua, p);
  r.dab = (p - 1.0) / n * powe(ua, p - 1.0) * powe(ub, p - 1.0) * sign(a) * sign(b);
  return r;
}

Vec3 rvachev_grad(double a, const Vec3& grad_a, double b, const Vec3& grad_b, double p) {
  const RvachevPartials r = rvachev_partials(a, b, p);
  return r.da * grad_a + r.db * grad_b;
}

MergedObstacle::MergedObstacle(std::vector<Obstacle> members, double p)
    : members_(std::move(members)), p_(p) {
  require_exponent(p_);
  if (members_.empty()) throw InputError("merged obstacle needs at least one member");
  for (const Obstacle& ob : members_) {
    if (ob.kind() == ObstacleKind::WorkspaceBoundary) {
      throw InputError("the workspace boundary cannot be a merge member");
    }
  }
}

ImplicitSample merged_sample(const MergedObstacle& m, const Vec3& x, bool with_hessian) {
  const auto& members = m.members();
  ImplicitSample acc;
  acc.value = beta(members.front(), x);
  acc.grad = beta_grad(members.front(), x);
  if (with_hessian) acc.hess = beta_hess(members.front(), x);

  for (std::size_t i = 1; i < members.size(); ++i) {
    const double b = beta(members[i], x);
    const Vec3 gb = beta_grad(members[i], x);
    const RvachevPartials r = rvachev_partials(acc.value, b, m.p());
    if (with_hessian) {
      const Mat3 hb = beta_hess(members[i], x);
      const Mat3 cross = acc.grad * gb.transpose();
      acc.hess = r.da * acc.hess + r.db * hb + r.daa * acc.grad * acc.grad.transpose() +
                 r.dab * (cross + cross.transpose()) + r.dbb * gb * gb.transpose();
    }
    acc.grad = r.da * acc.grad + r.db * gb;
    acc.value = r.value;
  }
  return acc;
}

double merged_beta(const MergedObstacle& m, const Vec3& x) {
  const auto& members = m.members();
  double acc = beta(members.front(), x);
  for (std::size_t i = 1; i < members.size(); ++i) {
    acc = rvachev_union(acc, beta(members[i], x), m.p());
  }
  return acc;
}

Vec3 merged_grad(const MergedObstacle& m, const Vec3& x) { return merged_sample(m, x, false).grad; }

Mat3 merged_hess(const MergedObstacle& m, const Vec3& x) { return merged_sample(m, x, true).hess; }

}  // namespace navfield
