// SPDX-License-Identifier: Apache-2.0
//
// Boxes as 2D Gaussians: conversion, Bhattacharyya overlap, Wasserstein
// distance, and the overlap loss over all instances of an image.
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "p2rb/error.hpp"
#include "p2rb/geometry.hpp"

namespace p2rb {

/// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Cov2 {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;

  static Cov2 diag(double x, double y) { return {x, 0.0, y}; }

  double det() const { return xx * yy - xy * xy; }
  double trace() const { return xx + yy; }
  Cov2 inverse() const {
    const double d = det();
    return {yy / d, -xy / d, xx / d};
  }
  /// Eigenvalues, larger first.
  std::pair<double, double> eigenvalues() const {
    const double m = 0.5 * (xx + yy);
    const double r = std::hypot(0.5 * (xx - yy), xy);
    return {m + r, m - r};
  }
  bool is_spd() const { return xx > 0.0 && det() > 0.0; }
  Mat2 as_mat() const { return {xx, xy, xy, yy}; }
};

inline Cov2 operator+(const Cov2& a, const Cov2& b) { return {a.xx + b.xx, a.xy + b.xy, a.yy + b.yy}; }
inline Cov2 operator*(double s, const Cov2& a) { return {s * a.xx, s * a.xy, s * a.yy}; }
/// tr(A B) for symmetric A, B.
inline double trace_product(const Cov2& a, const Cov2& b) {
  return a.xx * b.xx + 2.0 * a.xy * b.xy + a.yy * b.yy;
}
inline double quad_form(const Cov2& a, Point2 v) {
  return a.xx * v.x * v.x + 2.0 * a.xy * v.x * v.y + a.yy * v.y * v.y;
}
/// m * s * m^T, symmetrized.
inline Cov2 congruence(const Mat2& m, const Cov2& s) {
  const Mat2 r = m * s.as_mat() * m.transposed();
  return {r.a, 0.5 * (r.b + r.c), r.d};
}

struct Gaussian2D {
  Point2 mu{};
  Cov2 sigma{};
};

/// Sigma = R diag(w/2, h/2)^2 R^T.
inline Gaussian2D rbox_to_gaussian(const RBox& b) {
  const double a2 = 0.25 * b.w * b.w;
  const double b2 = 0.25 * b.h * b.h;
  const double c = std::cos(b.theta);
  const double s = std::sin(b.theta);
  return {{b.cx, b.cy}, {a2 * c * c + b2 * s * s, (a2 - b2) * c * s, a2 * s * s + b2 * c * c}};
}

inline RBox gaussian_to_rbox(const Gaussian2D& g) {
  if (!g.sigma.is_spd()) throw Error(ErrorKind::InvalidCovariance, "covariance is not positive definite");
  const auto [l1, l2] = g.sigma.eigenvalues();
  if (!(l2 > 0.0)) throw Error(ErrorKind::InvalidCovariance, "non-positive eigenvalue");
  // Major-axis direction; isotropic input falls back to theta = 0.
  const double theta = (std::abs(g.sigma.xy) <= 1e-15 * l1 && g.sigma.xx >= g.sigma.yy)
                           ? 0.0
                           : 0.5 * std::atan2(2.0 * g.sigma.xy, g.sigma.xx - g.sigma.yy);
  return canonicalize({g.mu.x, g.mu.y, 2.0 * std::sqrt(l1), 2.0 * std::sqrt(l2), theta});
}

inline void require_spd(const Cov2& s, const char* what) {
  if (!s.is_spd()) throw Error(ErrorKind::InvalidCovariance, what);
}

inline double bhattacharyya_coefficient(const Gaussian2D& g1, const Gaussian2D& g2) {
  require_spd(g1.sigma, "bhattacharyya: first covariance not SPD");
  require_spd(g2.sigma, "bhattacharyya: second covariance not SPD");
  const Cov2 mean_cov = 0.5 * (g1.sigma + g2.sigma);
  const auto [lmax, lmin] = mean_cov.eigenvalues();
  if (!(lmin > 0.0) || lmax / lmin > 1e12)
    throw Error(ErrorKind::IllConditioned, "bhattacharyya: averaged covariance condition > 1e12");
  const Point2 d = g2.mu - g1.mu;
  const double maha = quad_form(mean_cov.inverse(), d);
  const double log_b = -0.125 * maha + 0.25 * std::log(g1.sigma.det()) +
                       0.25 * std::log(g2.sigma.det()) - 0.5 * std::log(mean_cov.det());
  return std::exp(log_b);
}

using OverlapMatrix = std::vector<std::vector<double>>;

inline OverlapMatrix overlap_matrix(std::span<const Gaussian2D> gs) {
  const std::size_t n = gs.size();
  OverlapMatrix m(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m[i][j] = m[j][i] = bhattacharyya_coefficient(gs[i], gs[j]);
  return m;
}

/// Mean over instances of the summed off-diagonal overlap: (1/N) sum_{i != j} M_ij.
inline double gaussian_overlap_loss(std::span<const Gaussian2D> gs) {
  const std::size_t n = gs.size();
  if (n < 2) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * bhattacharyya_coefficient(gs[i], gs[j]);
  return s / static_cast<double>(n);
}

/// Squared 2-Wasserstein distance via the closed 2x2 form
/// tr sqrt(S1^1/2 S2 S1^1/2) = sqrt(tr(S1 S2) + 2 sqrt(det S1 det S2)).
inline double wasserstein2_sq(const Gaussian2D& g1, const Gaussian2D& g2) {
  require_spd(g1.sigma, "wasserstein: first covariance not SPD");
  require_spd(g2.sigma, "wasserstein: second covariance not SPD");
  const Point2 d = g1.mu - g2.mu;
  const double cross_term =
      trace_product(g1.sigma, g2.sigma) + 2.0 * std::sqrt(g1.sigma.det() * g2.sigma.det());
  double d2 = dot(d, d) + g1.sigma.trace() + g2.sigma.trace() - 2.0 * std::sqrt(std::max(cross_term, 0.0));
  if (d2 < 0.0) {
    if (d2 < -1e-9) throw Error(ErrorKind::Numeric, "wasserstein: negative squared distance");
    d2 = 0.0;
  }
  return d2;
}

enum class GwdForm {
  Log1p,     // log(1 + d^2)
  Raw,       // d^2
  InvSqrt,   // 1 - 1 / (1 + d)
};

inline double gwd_from_sq(double d2, GwdForm form = GwdForm::Log1p) {
  switch (form) {
    case GwdForm::Log1p: return std::log1p(d2);
    case GwdForm::Raw: return d2;
    case GwdForm::InvSqrt: return 1.0 - 1.0 / (1.0 + std::sqrt(d2));
  }
  return d2;
}

/// dL/d(d^2) of the chosen form.
inline double gwd_slope(double d2, GwdForm form = GwdForm::Log1p) {
  switch (form) {
    case GwdForm::Log1p: return 1.0 / (1.0 + d2);
    case GwdForm::Raw: return 1.0;
    case GwdForm::InvSqrt: {
      const double r = std::sqrt(d2);
      if (r <= 0.0) return 0.0;
      return 1.0 / ((1.0 + r) * (1.0 + r) * 2.0 * r);
    }
  }
  return 1.0;
}

inline double gwd_loss(const Gaussian2D& g1, const Gaussian2D& g2, GwdForm form = GwdForm::Log1p) {
  return gwd_from_sq(wasserstein2_sq(g1, g2), form);
}

// ---------------------------------------------------------------------------
// Analytic gradients with respect to box parameters
// (log w, log h, theta, cx, cy).

struct BoxGrad {
  double d_logw = 0.0;
  double d_logh = 0.0;
  double d_theta = 0.0;
  double d_cx = 0.0;
  double d_cy = 0.0;

  BoxGrad& operator+=(const BoxGrad& o) {
    d_logw += o.d_logw;
    d_logh += o.d_logh;
    d_theta += o.d_theta;
    d_cx += o.d_cx;
    d_cy += o.d_cy;
    return *this;
  }
};

inline BoxGrad operator*(double s, const BoxGrad& g) {
  return {s * g.d_logw, s * g.d_logh, s * g.d_theta, s * g.d_cx, s * g.d_cy};
}

/// Derivatives of the box covariance with respect to (log w, log h, theta).
struct CovJacobian {
  Cov2 d_logw;
  Cov2 d_logh;
  Cov2 d_theta;
};

inline CovJacobian covariance_jacobian(const RBox& b) {
  const double a2 = 0.25 * b.w * b.w;
  const double b2 = 0.25 * b.h * b.h;
  const double c = std::cos(b.theta);
  const double s = std::sin(b.theta);
  const double s2 = std::sin(2.0 * b.theta);
  const double c2 = std::cos(2.0 * b.theta);
  return {{2.0 * a2 * c * c, 2.0 * a2 * c * s, 2.0 * a2 * s * s},
          {2.0 * b2 * s * s, -2.0 * b2 * c * s, 2.0 * b2 * c * c},
          {-(a2 - b2) * s2, (a2 - b2) * c2, (a2 - b2) * s2}};
}

inline BoxGrad contract(const Cov2& g, const CovJacobian& j) {
  return {trace_product(g, j.d_logw), trace_product(g, j.d_logh), trace_product(g, j.d_theta)};
}

/// Bhattacharyya coefficient of two boxes with gradients for both.
struct PairOverlap {
  double value = 0.0;
  BoxGrad grad_a;
  BoxGrad grad_b;
};

inline PairOverlap bhattacharyya_with_grad(const RBox& a, const RBox& b) {
  const Gaussian2D ga = rbox_to_gaussian(a);
  const Gaussian2D gb = rbox_to_gaussian(b);
  PairOverlap out;
  out.value = bhattacharyya_coefficient(ga, gb);
  const Cov2 mean_cov = 0.5 * (ga.sigma + gb.sigma);
  const Cov2 mean_inv = mean_cov.inverse();
  const Point2 d = gb.mu - ga.mu;
  const Point2 v{mean_inv.xx * d.x + mean_inv.xy * d.y, mean_inv.xy * d.x + mean_inv.yy * d.y};
  // d log B / d Sigma_k = vv^T / 16 + Sigma_k^-1 / 4 - S^-1 / 4
  const Cov2 common{v.x * v.x / 16.0 - 0.25 * mean_inv.xx, v.x * v.y / 16.0 - 0.25 * mean_inv.xy,
                    v.y * v.y / 16.0 - 0.25 * mean_inv.yy};
  const Cov2 ga_g = common + 0.25 * ga.sigma.inverse();
  const Cov2 gb_g = common + 0.25 * gb.sigma.inverse();
  BoxGrad da = contract(ga_g, covariance_jacobian(a));
  BoxGrad db = contract(gb_g, covariance_jacobian(b));
  // d log B / d mu_b = -v / 4 with v = S^-1 (mu_b - mu_a).
  da.d_cx = 0.25 * v.x;
  da.d_cy = 0.25 * v.y;
  db.d_cx = -0.25 * v.x;
  db.d_cy = -0.25 * v.y;
  out.grad_a = out.value * da;
  out.grad_b = out.value * db;
  return out;
}

struct OverlapLossGrad {
  double value = 0.0;
  std::vector<BoxGrad> grads;
};

inline OverlapLossGrad gaussian_overlap_loss_with_grad(std::span<const RBox> boxes) {
  const std::size_t n = boxes.size();
  OverlapLossGrad out;
  out.grads.assign(n, BoxGrad{});
  if (n < 2) return out;
  const double scale = 2.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const PairOverlap p = bhattacharyya_with_grad(boxes[i], boxes[j]);
      out.value += scale * p.value;
      out.grads[i] += scale * p.grad_a;
      out.grads[j] += scale * p.grad_b;
    }
  }
  return out;
}

}  // namespace p2rb
