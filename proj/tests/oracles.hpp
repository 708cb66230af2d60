// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used by the tests. They favor
// directness over speed and share no code paths with the library beyond the
// plain data types.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "p2rb/edge.hpp"
#include "p2rb/gaussian.hpp"
#include "p2rb/geometry.hpp"
#include "p2rb/tessellation.hpp"
#include "p2rb/watershed.hpp"

namespace oracle {

using p2rb::Gaussian2D;
using p2rb::Point2;
using p2rb::RBox;

inline Eigen::Matrix2d to_eigen(const p2rb::Cov2& c) {
  Eigen::Matrix2d m;
  m << c.xx, c.xy, c.xy, c.yy;
  return m;
}

inline double gaussian_pdf(const Eigen::Vector2d& x, const Eigen::Vector2d& mu, const Eigen::Matrix2d& s) {
  const Eigen::Vector2d d = x - mu;
  return std::exp(-0.5 * d.dot(s.inverse() * d)) / (2.0 * M_PI * std::sqrt(s.determinant()));
}

/// Midpoint-rule integral of sqrt(p1 p2) over a box covering both densities.
inline double bhattacharyya_numeric(const Gaussian2D& g1, const Gaussian2D& g2) {
  const Eigen::Matrix2d s1 = to_eigen(g1.sigma), s2 = to_eigen(g2.sigma);
  const Eigen::Matrix2d i1 = s1.inverse(), i2 = s2.inverse();
  const double n1 = 1.0 / (2.0 * M_PI * std::sqrt(s1.determinant()));
  const double n2 = 1.0 / (2.0 * M_PI * std::sqrt(s2.determinant()));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> e1(s1), e2(s2);
  const double min_std = std::sqrt(std::min(e1.eigenvalues().minCoeff(), e2.eigenvalues().minCoeff()));
  const double max_std = std::sqrt(std::max(e1.eigenvalues().maxCoeff(), e2.eigenvalues().maxCoeff()));
  const double x0 = std::min(g1.mu.x, g2.mu.x) - 10.0 * max_std, x1 = std::max(g1.mu.x, g2.mu.x) + 10.0 * max_std;
  const double y0 = std::min(g1.mu.y, g2.mu.y) - 10.0 * max_std, y1 = std::max(g1.mu.y, g2.mu.y) + 10.0 * max_std;
  const double step = min_std / 6.0;
  const int nx = static_cast<int>(std::ceil((x1 - x0) / step));
  const int ny = static_cast<int>(std::ceil((y1 - y0) / step));
  const double dx = (x1 - x0) / nx, dy = (y1 - y0) / ny;
  double sum = 0.0;
  for (int j = 0; j < ny; ++j) {
    const double y = y0 + (j + 0.5) * dy;
    for (int i = 0; i < nx; ++i) {
      const double x = x0 + (i + 0.5) * dx;
      const Eigen::Vector2d a(x - g1.mu.x, y - g1.mu.y), b(x - g2.mu.x, y - g2.mu.y);
      sum += std::sqrt(n1 * n2) * std::exp(-0.25 * a.dot(i1 * a) - 0.25 * b.dot(i2 * b));
    }
  }
  return sum * dx * dy;
}

inline Eigen::Matrix2d sqrtm_spd(const Eigen::Matrix2d& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
  Eigen::Vector2d ev = es.eigenvalues();
  for (int i = 0; i < 2; ++i) ev(i) = std::sqrt(std::max(ev(i), 0.0));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// ||mu1 - mu2||^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2) via eigendecompositions.
inline double wasserstein2_sq_eigen(const Gaussian2D& g1, const Gaussian2D& g2) {
  const Eigen::Matrix2d s1 = to_eigen(g1.sigma), s2 = to_eigen(g2.sigma);
  const Eigen::Matrix2d r1 = sqrtm_spd(s1);
  Eigen::Matrix2d m = r1 * s2 * r1;
  m = 0.5 * (m + m.transpose());
  const Eigen::Vector2d d(g1.mu.x - g2.mu.x, g1.mu.y - g2.mu.y);
  return d.squaredNorm() + s1.trace() + s2.trace() - 2.0 * sqrtm_spd(m).trace();
}

/// Nearest site by exhaustive search; sites closer than 0.5 px to an
/// earlier site are dropped and ties go to the lowest index.
inline p2rb::CellLabelMap voronoi_brute(const std::vector<Point2>& pts, int w, int h) {
  std::vector<int> ids;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dup = false;
    for (int u : ids) dup = dup || std::hypot(pts[u].x - pts[i].x, pts[u].y - pts[i].y) < 0.5;
    if (!dup) ids.push_back(static_cast<int>(i));
  }
  p2rb::CellLabelMap out(w, h, -1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double best = std::numeric_limits<double>::infinity();
      for (int id : ids) {
        const double d = (x - pts[id].x) * (x - pts[id].x) + (y - pts[id].y) * (y - pts[id].y);
        if (d < best) {
          best = d;
          out(x, y) = id;
        }
      }
    }
  return out;
}

/// Priority flood simulated with a flat list of pending claims and a linear
/// scan for the lowest (height, arrival) claim at every step.
inline p2rb::BasinLabelMap flood_brute(const p2rb::TerrainSurface& s, const std::vector<std::pair<int, int>>& markers,
                                       const p2rb::RidgeMask& barriers, bool background_seeds) {
  const int w = s.width(), h = s.height();
  p2rb::BasinLabelMap lab(w, h, p2rb::kUnassigned);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (!barriers.empty() && barriers(x, y)) lab(x, y) = p2rb::kBarrier;
  struct Claim {
    int x, y, label;
    long long arrival;
  };
  std::vector<Claim> pending;
  long long clock = 0;
  auto claim = [&](int x, int y, int label) { pending.push_back({x, y, label, clock++}); };
  auto claim_neighbors = [&](int x, int y, int label) {
    const int nb[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
    for (const auto& n : nb)
      if (n[0] >= 0 && n[1] >= 0 && n[0] < w && n[1] < h && lab(n[0], n[1]) == p2rb::kUnassigned)
        claim(n[0], n[1], label);
  };
  for (std::size_t i = 0; i < markers.size(); ++i) claim(markers[i].first, markers[i].second, static_cast<int>(i));
  if (background_seeds) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (!barriers.empty() && barriers(x, y)) claim_neighbors(x, y, p2rb::kBackground);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if ((x == 0 || y == 0 || x == w - 1 || y == h - 1) && lab(x, y) == p2rb::kUnassigned)
          claim(x, y, p2rb::kBackground);
  }
  for (;;) {
    int pick = -1;
    for (std::size_t k = 0; k < pending.size(); ++k) {
      if (pick < 0) {
        pick = static_cast<int>(k);
        continue;
      }
      const Claim& a = pending[k];
      const Claim& b = pending[static_cast<std::size_t>(pick)];
      const double ha = s(a.x, a.y), hb = s(b.x, b.y);
      if (ha < hb || (ha == hb && a.arrival < b.arrival)) pick = static_cast<int>(k);
    }
    if (pick < 0) break;
    const Claim c = pending[static_cast<std::size_t>(pick)];
    pending[static_cast<std::size_t>(pick)] = pending.back();
    pending.pop_back();
    if (lab(c.x, c.y) != p2rb::kUnassigned) continue;
    lab(c.x, c.y) = c.label;
    claim_neighbors(c.x, c.y, c.label);
  }
  return lab;
}

/// 2 * componentwise max of the basin pixels expressed in the box frame.
inline p2rb::WidthHeightTarget wh_target_brute(const std::vector<Point2>& basin, const RBox& b) {
  if (basin.empty()) return {1.0, 1.0, true};
  const p2rb::Mat2 rt = p2rb::rotation_matrix(b.theta).transposed();
  double mu = 0.0, mv = 0.0;
  for (const Point2& p : basin) {
    const Point2 q = rt * (p - b.center());
    mu = std::max(mu, std::abs(q.x));
    mv = std::max(mv, std::abs(q.y));
  }
  return {std::max(2.0 * mu, 1.0), std::max(2.0 * mv, 1.0), false};
}

/// Folded profile straight from the definition.
inline std::vector<double> fold_brute(const p2rb::RoiPatch& p, bool height_axis) {
  std::vector<double> out;
  for (int i = 1; i <= p.K; ++i) {
    double s = 0.0;
    for (int r = 0; r <= 2 * p.K; ++r)
      for (int c = 0; c <= 2 * p.K; ++c) {
        const int off = height_axis ? r - p.K : c - p.K;
        if (off == i || off == -i) s += p(r, c);
      }
    out.push_back(s);
  }
  return out;
}

/// Largest number of one-to-one pairs with IoU >= thr, by exhaustive search.
inline std::size_t max_matching(const std::vector<RBox>& gt, const std::vector<RBox>& pred, double thr) {
  std::vector<std::vector<char>> ok(gt.size(), std::vector<char>(pred.size(), 0));
  for (std::size_t i = 0; i < gt.size(); ++i)
    for (std::size_t j = 0; j < pred.size(); ++j) ok[i][j] = p2rb::rotated_iou(gt[i], pred[j]) >= thr;
  std::vector<char> used(pred.size(), 0);
  std::function<std::size_t(std::size_t)> go = [&](std::size_t i) -> std::size_t {
    if (i == gt.size()) return 0;
    std::size_t best = go(i + 1);
    for (std::size_t j = 0; j < pred.size(); ++j) {
      if (used[j] || !ok[i][j]) continue;
      used[j] = 1;
      best = std::max(best, 1 + go(i + 1));
      used[j] = 0;
    }
    return best;
  };
  return go(0);
}

inline bool inside(const RBox& b, double x, double y) {
  const double c = std::cos(b.theta), s = std::sin(b.theta);
  const double dx = x - b.cx, dy = y - b.cy;
  return std::abs(c * dx + s * dy) <= 0.5 * b.w && std::abs(-s * dx + c * dy) <= 0.5 * b.h;
}

/// Monte-Carlo IoU over the bounding square of both boxes.
inline double iou_monte_carlo(const RBox& a, const RBox& b, int samples, std::uint64_t seed) {
  const double ra = 0.5 * std::hypot(a.w, a.h), rb = 0.5 * std::hypot(b.w, b.h);
  const double x0 = std::min(a.cx - ra, b.cx - rb), x1 = std::max(a.cx + ra, b.cx + rb);
  const double y0 = std::min(a.cy - ra, b.cy - rb), y1 = std::max(a.cy + ra, b.cy + rb);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  long inter = 0, uni = 0;
  for (int k = 0; k < samples; ++k) {
    const double x = ux(rng), y = uy(rng);
    const bool ia = inside(a, x, y), ib = inside(b, x, y);
    inter += ia && ib;
    uni += ia || ib;
  }
  return uni ? static_cast<double>(inter) / uni : 0.0;
}

/// Central difference with step h.
inline double central(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
