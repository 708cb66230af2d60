// SPDX-License-Identifier: Apache-2.0
//
// Edge alignment: edge map, rotated ROI resampling, folded edge profiles and
// the edge loss that snaps box sides to image edges.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "p2rb/error.hpp"
#include "p2rb/gaussian.hpp"
#include "p2rb/geometry.hpp"
#include "p2rb/grid.hpp"
#include "p2rb/watershed.hpp"

namespace p2rb {

/// Edge strength in [0, 1].
using EdgeMap = Grid<double>;

struct EdgeParams {
  int K = 24;
  double beta = 1.6;
  double sigma_e = 6.0;
};

/// 3x3 Sobel magnitude divided by its 99th percentile and clamped to [0, 1].
inline EdgeMap sobel_edge_map(const Image& image) {
  if (image.empty()) throw Error(ErrorKind::Config, "sobel_edge_map: empty image");
  const int w = image.width();
  const int h = image.height();
  auto at = [&](int x, int y) { return image(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  EdgeMap out(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
      out(x, y) = std::hypot(gx, gy);
    }
  std::vector<double> sorted = out.data();
  const std::size_t k = std::min(sorted.size() - 1, static_cast<std::size_t>(0.99 * static_cast<double>(sorted.size())));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
  double scale = sorted[k];
  if (!(scale > 0.0)) scale = *std::max_element(out.data().begin(), out.data().end());
  if (!(scale > 0.0)) return out;
  for (double& v : out.data()) v = std::clamp(v / scale, 0.0, 1.0);
  return out;
}

/// Bilinear lookup treating everything outside the map as 0.
inline double sample_bilinear(const Grid<double>& map, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  if (x0 < -1 || y0 < -1 || x0 >= map.width() || y0 >= map.height()) return 0.0;
  const double tx = x - fx;
  const double ty = y - fy;
  auto v = [&](int xx, int yy) { return map.in_bounds(xx, yy) ? map(xx, yy) : 0.0; };
  return (1.0 - ty) * ((1.0 - tx) * v(x0, y0) + tx * v(x0 + 1, y0)) +
         ty * ((1.0 - tx) * v(x0, y0 + 1) + tx * v(x0 + 1, y0 + 1));
}

/// (2K+1) x (2K+1) resampled window. Rows run along the box height axis,
/// columns along the width axis; the center sample is the box center.
struct RoiPatch {
  int K = 0;
  std::vector<double> values;

  int side() const { return 2 * K + 1; }
  double operator()(int row, int col) const {
    return values[static_cast<std::size_t>(row) * static_cast<std::size_t>(side()) + static_cast<std::size_t>(col)];
  }
  double& operator()(int row, int col) {
    return values[static_cast<std::size_t>(row) * static_cast<std::size_t>(side()) + static_cast<std::size_t>(col)];
  }
};

/// Samples the box scaled by beta with spacing (beta w / 2K, beta h / 2K).
inline RoiPatch rotated_roi_align(const EdgeMap& map, const RBox& b, int K, double beta) {
  if (K < 1) throw Error(ErrorKind::Config, "rotated_roi_align: K must be >= 1");
  if (!(beta > 0.0)) throw Error(ErrorKind::Config, "rotated_roi_align: beta must be positive");
  RoiPatch p{K, std::vector<double>(static_cast<std::size_t>(2 * K + 1) * static_cast<std::size_t>(2 * K + 1), 0.0)};
  const double c = std::cos(b.theta);
  const double s = std::sin(b.theta);
  const double du = beta * b.w / (2.0 * K);
  const double dv = beta * b.h / (2.0 * K);
  for (int r = 0; r <= 2 * K; ++r) {
    const double v = (r - K) * dv;
    for (int col = 0; col <= 2 * K; ++col) {
      const double u = (col - K) * du;
      p(r, col) = sample_bilinear(map, b.cx + c * u - s * v, b.cy + s * u + c * v);
    }
  }
  return p;
}

enum class FoldAxis { Width, Height };

/// Folds the patch about its center line: entry i-1 holds the summed lines
/// at offsets -i and +i from the center (i = 1..K). The center line itself
/// does not contribute.
inline std::vector<double> fold_profile(const RoiPatch& p, FoldAxis axis) {
  const int K = p.K;
  std::vector<double> mu(static_cast<std::size_t>(K), 0.0);
  for (int i = 1; i <= K; ++i) {
    double s = 0.0;
    for (int j = 0; j <= 2 * K; ++j)
      s += axis == FoldAxis::Height ? p(K - i, j) + p(K + i, j) : p(j, K - i) + p(j, K + i);
    mu[static_cast<std::size_t>(i - 1)] = s;
  }
  return mu;
}

/// Gaussian prior over fold offsets centered on where the current box side lies.
inline std::vector<double> soft_prior(int K, double beta, double sigma_e) {
  if (K < 1 || !(beta > 0.0) || !(sigma_e > 0.0)) throw Error(ErrorKind::Config, "soft_prior: invalid parameters");
  std::vector<double> lambda(static_cast<std::size_t>(K));
  for (int i = 1; i <= K; ++i) {
    const double d = i - K / beta;
    lambda[static_cast<std::size_t>(i - 1)] = std::exp(-(d * d) / (2.0 * sigma_e * sigma_e));
  }
  return lambda;
}

struct EdgeTarget {
  WidthHeightTarget wh;
  bool width_evidence = true;
  bool height_evidence = true;
};

namespace detail {

/// 1-based argmax of mu * lambda; 0 when the product is all zero.
inline int weighted_argmax(std::span<const double> mu, std::span<const double> lambda) {
  int best = 0;
  double best_v = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double v = mu[i] * lambda[i];
    if (v > best_v) {
      best_v = v;
      best = static_cast<int>(i) + 1;
    }
  }
  return best;
}

}  // namespace detail

inline EdgeTarget edge_wh_target_from_patch(const RoiPatch& patch, const RBox& b, double beta,
                                            std::span<const double> lambda) {
  const int K = patch.K;
  EdgeTarget t;
  const int iw = detail::weighted_argmax(fold_profile(patch, FoldAxis::Width), lambda);
  const int ih = detail::weighted_argmax(fold_profile(patch, FoldAxis::Height), lambda);
  t.width_evidence = iw > 0;
  t.height_evidence = ih > 0;
  t.wh.w = iw > 0 ? beta * b.w / K * iw : b.w;
  t.wh.h = ih > 0 ? beta * b.h / K * ih : b.h;
  t.wh.fallback = !(t.width_evidence && t.height_evidence);
  return t;
}

/// h_t = (beta h / K) argmax_i(mu_i lambda_i), likewise for w_t. Without
/// any edge evidence the current dimension is returned unchanged.
inline EdgeTarget edge_wh_target(const EdgeMap& map, const RBox& b, const EdgeParams& params = {}) {
  const auto lambda = soft_prior(params.K, params.beta, params.sigma_e);
  return edge_wh_target_from_patch(rotated_roi_align(map, b, params.K, params.beta), b, params.beta, lambda);
}

inline constexpr double kSmoothL1Beta = 1.0;

inline double smooth_l1(double x, double beta = kSmoothL1Beta) {
  const double a = std::abs(x);
  return a < beta ? 0.5 * x * x / beta : a - 0.5 * beta;
}

inline double smooth_l1_slope(double x, double beta = kSmoothL1Beta) {
  const double a = std::abs(x);
  if (a < beta) return x / beta;
  return x > 0.0 ? 1.0 : -1.0;
}

inline double edge_loss(const RBox& b, const WidthHeightTarget& t) {
  return smooth_l1(b.w - t.w) + smooth_l1(b.h - t.h);
}

inline BoxGrad edge_loss_grad(const RBox& b, const WidthHeightTarget& t) {
  return {smooth_l1_slope(b.w - t.w) * b.w, smooth_l1_slope(b.h - t.h) * b.h, 0.0};
}

}  // namespace p2rb
