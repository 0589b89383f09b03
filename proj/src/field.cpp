#include "navfield/field.hpp"

#include <algorithm>
#include <limits>

namespace navfield {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Log-derivative sums over all factors (boundary included), valid when every
// factor is positive:
//   log_beta = sum log b_i
//   g        = grad(beta) / beta = sum grad(b_i) / b_i
//   h        = D2(beta) / beta   = sum H_i / b_i - sum g_i g_i^T / b_i^2 + g g^T
struct LogFactors {
  double log_beta = 0.0;
  Vec3 g = Vec3::Zero();
  Mat3 h = Mat3::Zero();
  bool on_boundary = false;  // some factor is exactly zero
};

template <typename Fn>
void for_each_factor(const Workspace& ws, const Vec3& x, bool with_hessian, Fn&& fn) {
  const Obstacle bnd = ws.boundary();
  ImplicitSample s;
  s.value = beta(bnd, x);
  s.grad = beta_grad(bnd, x);
  if (with_hessian) s.hess = beta_hess(bnd, x);
  fn(s);
  for (const Shape& shape : ws.obstacles) fn(shape_sample(shape, x, with_hessian));
}

LogFactors log_factors(const Workspace& ws, const Vec3& x, bool with_hessian) {
  LogFactors out;
  Mat3 grad_outer = Mat3::Zero();
  for_each_factor(ws, x, with_hessian, [&](const ImplicitSample& s) {
    if (s.value < 0.0 || std::isnan(s.value)) {
      throw DomainError("point is outside the free space");
    }
    if (s.value == 0.0) {
      out.on_boundary = true;
      return;
    }
    out.log_beta += std::log(s.value);
    const Vec3 gi = s.grad / s.value;
    out.g += gi;
    if (with_hessian) {
      out.h += s.hess / s.value;
      grad_outer += gi * gi.transpose();
    }
  });
  if (with_hessian) out.h += out.g * out.g.transpose() - grad_outer;
  return out;
}

// gamma^j / s computed as exp(j log gamma - log s); gamma == 0 handled exactly.
double gamma_pow_ratio(double log_gamma, int j, double log_s) {
  if (j == 0) return std::exp(-log_s);
  if (std::isinf(log_gamma)) return 0.0;
  return std::exp(j * log_gamma - log_s);
}

double log_sum_exp(double a, double b) {
  if (std::isinf(a) && a < 0) return b;
  if (std::isinf(b) && b < 0) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct PhiParts {
  double log_s;
  double d;
  Vec3 grad_s_over_s;  // grad(gamma^k + beta) / (gamma^k + beta)
};

PhiParts phi_parts(int k, double gamma, const Vec3& grad_gamma, const LogFactors& lf) {
  PhiParts p{};
  const double log_gamma = std::log(gamma);  // -inf at the target
  p.log_s = log_sum_exp(k * log_gamma, lf.log_beta);
  p.d = std::exp(p.log_s / k);
  const double v = std::exp(lf.log_beta - p.log_s);
  p.grad_s_over_s = k * gamma_pow_ratio(log_gamma, k - 1, p.log_s) * grad_gamma + v * lf.g;
  return p;
}

// Hessian of gamma^k + beta, divided by (gamma^k + beta).
Mat3 phi_d2s_over_s(int k, double gamma, const Vec3& grad_gamma, const LogFactors& lf, double log_s) {
  const double log_gamma = std::log(gamma);
  const Mat3 I = Mat3::Identity();
  Mat3 out = std::exp(lf.log_beta - log_s) * lf.h;
  out += 2.0 * k * gamma_pow_ratio(log_gamma, k - 1, log_s) * I;
  if (k >= 2) {
    out += double(k) * (k - 1) * gamma_pow_ratio(log_gamma, k - 2, log_s) * grad_gamma *
           grad_gamma.transpose();
  }
  return out;
}

// D2 of d = s^(1/k), given grad(s)/s and D2(s)/s.
Mat3 phi_d2d(int k, double d, const Vec3& gs, const Mat3& hs) {
  const Vec3 q = gs / k;
  const Mat3 dq = (hs - gs * gs.transpose()) / k;
  return d * (q * q.transpose() + dq);
}

}  // namespace

std::string_view to_string(Potential p) {
  switch (p) {
    case Potential::BaseFhat: return "fhat";
    case Potential::Phi: return "phi";
    case Potential::Psi: return "psi";
  }
  return "psi";
}

Potential potential_from_string(std::string_view name) {
  if (name == "fhat") return Potential::BaseFhat;
  if (name == "phi") return Potential::Phi;
  if (name == "psi") return Potential::Psi;
  throw InputError("unknown potential '" + std::string(name) + "' (expected phi, psi or fhat)");
}

double gamma_d(const NavSpec& spec, const Vec3& x) { return (x - spec.target).squaredNorm(); }

Vec3 gamma_grad(const NavSpec& spec, const Vec3& x) { return 2.0 * (x - spec.target); }

double min_beta(const Workspace& ws, const Vec3& x) {
  double m = beta(ws.boundary(), x);
  for (const Shape& s : ws.obstacles) m = std::min(m, shape_beta(s, x));
  return m;
}

bool in_free_space(const Workspace& ws, const Vec3& x) { return min_beta(ws, x) > 0.0; }

void check_nav_spec(const NavSpec& spec, const Workspace& ws) {
  if (spec.k < 1) throw InputError("tuning parameter k must be >= 1");
  if (!spec.target.allFinite()) throw InputError("target has non-finite components");
  if (!in_free_space(ws, spec.target)) throw InputError("target is not strictly inside the free space");
}

BetaProduct beta_product(const Workspace& ws, const Vec3& x) {
  BetaProduct out;
  out.factors.reserve(ws.obstacles.size() + 1);
  out.total = 1.0;
  for_each_factor(ws, x, false, [&](const ImplicitSample& s) {
    out.factors.push_back(s.value);
    out.total *= s.value;
  });
  return out;
}

Vec3 beta_product_grad(const Workspace& ws, const Vec3& x) {
  std::vector<double> b;
  std::vector<Vec3> g;
  b.reserve(ws.obstacles.size() + 1);
  g.reserve(ws.obstacles.size() + 1);
  for_each_factor(ws, x, false, [&](const ImplicitSample& s) {
    b.push_back(s.value);
    g.push_back(s.grad);
  });
  const std::size_t n = b.size();
  // suffix[i] = prod_{j >= i} b_j
  std::vector<double> suffix(n + 1, 1.0);
  for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] * b[i];
  Vec3 out = Vec3::Zero();
  double prefix = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    out += g[i] * (prefix * suffix[i + 1]);
    prefix *= b[i];
  }
  return out;
}

FieldPoint potential(const NavSpec& spec, const Workspace& ws, const Vec3& x) {
  const double gamma = gamma_d(spec, x);
  const Vec3 gg = gamma_grad(spec, x);
  const int k = spec.k;
  const LogFactors lf = log_factors(ws, x, false);
  FieldPoint out;

  if (lf.on_boundary) {
    switch (spec.potential) {
      case Potential::BaseFhat:
        throw DomainError("base potential is singular on the free-space boundary");
      case Potential::Phi:
        out.value = 1.0;
        out.gradient = -beta_product_grad(ws, x) / (k * std::pow(gamma, k));
        return out;
      case Potential::Psi:
        out.value = 1.0;
        out.gradient = k == 1 ? Vec3(-beta_product_grad(ws, x) / gamma) : Vec3(kNaN, kNaN, kNaN);
        return out;
    }
  }

  switch (spec.potential) {
    case Potential::BaseFhat: {
      if (gamma == 0.0) return out;
      const double log_gamma = std::log(gamma);
      out.value = std::exp(k * log_gamma - lf.log_beta);
      out.gradient = k * std::exp((k - 1) * log_gamma - lf.log_beta) * gg - out.value * lf.g;
      return out;
    }
    case Potential::Phi: {
      const PhiParts p = phi_parts(k, gamma, gg, lf);
      out.value = gamma / p.d;
      out.gradient = gg / p.d - (out.value / k) * p.grad_s_over_s;
      return out;
    }
    case Potential::Psi: {
      const double b = std::exp(lf.log_beta / k);
      const double den = gamma + b;
      out.value = gamma / den;
      out.gradient = (b / (den * den)) * (gg - (gamma / k) * lf.g);
      return out;
    }
  }
  return out;
}

FieldEval eval(const NavSpec& spec, const Workspace& ws, const Vec3& x) {
  const FieldPoint fp = potential(spec, ws, x);
  FieldEval out;
  out.value = fp.value;
  out.gradient = fp.gradient;
  out.gamma = gamma_d(spec, x);
  const BetaProduct bp = beta_product(ws, x);
  out.per_obstacle_beta = bp.factors;
  out.beta_total = bp.total;
  double lb = 0.0;
  for (double b : bp.factors) lb += std::log(b);
  out.log_beta = lb;
  return out;
}

Mat3 potential_hessian(const NavSpec& spec, const Workspace& ws, const Vec3& x) {
  const double gamma = gamma_d(spec, x);
  const Vec3 gg = gamma_grad(spec, x);
  const int k = spec.k;
  const LogFactors lf = log_factors(ws, x, true);
  if (lf.on_boundary) throw DomainError("Hessian is not defined on the free-space boundary");
  const Mat3 I = Mat3::Identity();

  switch (spec.potential) {
    case Potential::BaseFhat: {
      const double beta_inv = std::exp(-lf.log_beta);
      if (gamma == 0.0) return k == 1 ? Mat3(2.0 * beta_inv * I) : Mat3(Mat3::Zero());
      // f = exp(k log gamma - log beta), grad f = f w, D2 f = f (w w^T + grad w)
      const double f = std::exp(k * std::log(gamma) - lf.log_beta);
      const Vec3 w = k * gg / gamma - lf.g;
      const Mat3 grad_g = lf.h - lf.g * lf.g.transpose();
      const Mat3 dw = k * (2.0 * I / gamma - gg * gg.transpose() / (gamma * gamma)) - grad_g;
      return f * (w * w.transpose() + dw);
    }
    case Potential::Phi: {
      const PhiParts p = phi_parts(k, gamma, gg, lf);
      const Mat3 hs = phi_d2s_over_s(k, gamma, gg, lf, p.log_s);
      const double rho = gamma / p.d;
      const Vec3 grad_d = p.d * p.grad_s_over_s / k;
      const Vec3 grad_rho = gg / p.d - rho * grad_d / p.d;
      const Mat3 d2d = phi_d2d(k, p.d, p.grad_s_over_s, hs);
      return (2.0 * I - grad_rho * grad_d.transpose() - grad_d * grad_rho.transpose() - rho * d2d) / p.d;
    }
    case Potential::Psi: {
      const double b = std::exp(lf.log_beta / k);
      const double den = gamma + b;
      const double rho = gamma / den;
      const Vec3 grad_den = gg + (b / k) * lf.g;
      const Vec3 grad_rho = (gg - rho * grad_den) / den;
      const Mat3 d2b = b * (lf.g * lf.g.transpose() / double(k * k) + (lf.h - lf.g * lf.g.transpose()) / k);
      const Mat3 d2den = 2.0 * I + d2b;
      return (2.0 * I - grad_rho * grad_den.transpose() - grad_den * grad_rho.transpose() - rho * d2den) / den;
    }
  }
  return Mat3::Zero();
}

Mat3 hessian_at_critical(const NavSpec& spec, const Workspace& ws, const Vec3& x, double grad_tol) {
  const FieldPoint fp = potential(spec, ws, x);
  if (!(fp.gradient.norm() <= grad_tol)) {
    throw DomainError("hessian_at_critical called at a non-critical point (gradient norm " +
                      std::to_string(fp.gradient.norm()) + ")");
  }
  const double gamma = gamma_d(spec, x);
  const Vec3 gg = gamma_grad(spec, x);
  const int k = spec.k;
  const LogFactors lf = log_factors(ws, x, true);
  if (lf.on_boundary) throw DomainError("Hessian is not defined on the free-space boundary");
  const Mat3 I = Mat3::Identity();
  Mat3 h;

  switch (spec.potential) {
    case Potential::BaseFhat: {
      // nu = gamma^k, delta = beta:  D2 nu / beta - fhat * D2 beta / beta
      const double log_gamma = std::log(gamma);
      const double log_beta = lf.log_beta;
      Mat3 d2nu = 2.0 * k * gamma_pow_ratio(log_gamma, k - 1, log_beta) * I;
      if (k >= 2) {
        d2nu += double(k) * (k - 1) * gamma_pow_ratio(log_gamma, k - 2, log_beta) * gg * gg.transpose();
      }
      const double f = gamma == 0.0 ? 0.0 : std::exp(k * log_gamma - log_beta);
      h = d2nu - f * lf.h;
      break;
    }
    case Potential::Phi: {
      const PhiParts p = phi_parts(k, gamma, gg, lf);
      const Mat3 hs = phi_d2s_over_s(k, gamma, gg, lf, p.log_s);
      h = (2.0 * I - (gamma / p.d) * phi_d2d(k, p.d, p.grad_s_over_s, hs)) / p.d;
      break;
    }
    case Potential::Psi: {
      const double b = std::exp(lf.log_beta / k);
      const double den = gamma + b;
      const Mat3 d2b = b * (lf.g * lf.g.transpose() / double(k * k) + (lf.h - lf.g * lf.g.transpose()) / k);
      h = (2.0 * I - (gamma / den) * (2.0 * I + d2b)) / den;
      break;
    }
  }
  return 0.5 * (h + h.transpose());
}

double default_grad_tol(const Workspace& ws) { return 1e-8 * (1.0 + 1.0 / ws.outer_radius); }

}  // namespace navfield
