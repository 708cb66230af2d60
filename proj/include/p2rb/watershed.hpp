// SPDX-License-Identifier: Apache-2.0
//
// Marker-based watershed on an image-derived surface, basin extents in the
// frame of a box, and the Voronoi watershed size loss.
#pragma once

#include <cmath>
#include <cstdint>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "p2rb/error.hpp"
#include "p2rb/gaussian.hpp"
#include "p2rb/geometry.hpp"
#include "p2rb/grid.hpp"
#include "p2rb/tessellation.hpp"

namespace p2rb {

using TerrainSurface = Grid<double>;

/// Labels >= 0 are marker indices.
using BasinLabelMap = Grid<std::int32_t>;
inline constexpr std::int32_t kUnassigned = -1;
inline constexpr std::int32_t kBarrier = -2;
inline constexpr std::int32_t kBackground = -3;

enum class SurfaceMode { GradientMagnitude, RawIntensity };

/// How ridge pixels take part in the flood.
enum class BarrierMode {
  /// Ridges are walls: never assigned, never crossed.
  Wall,
  /// Ridges are walls that also seed a competing background flood, as do
  /// the image frame pixels. Basins then stop at the surface crest between
  /// an object and its surroundings instead of filling the whole cell.
  BackgroundSeeds,
};

/// Normalized 1D Gaussian kernel of odd length `size`.
inline std::vector<double> gaussian_kernel(double sigma, int size) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const int r = size / 2;
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + r)];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Separable convolution with replicated borders.
inline Grid<double> convolve_separable(const Grid<double>& src, std::span<const double> kernel) {
  const int w = src.width();
  const int h = src.height();
  const int r = static_cast<int>(kernel.size()) / 2;
  Grid<double> tmp(w, h, 0.0);
  Grid<double> out(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += kernel[static_cast<std::size_t>(i + r)] * src(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += kernel[static_cast<std::size_t>(i + r)] * tmp(x, std::clamp(y + i, 0, h - 1));
      out(x, y) = s;
    }
  return out;
}

/// Gradient magnitude by central differences, smoothed with a 7x7 Gaussian
/// of sigma 1.5 px. Raw mode returns the intensities unchanged.
inline TerrainSurface make_surface(const Image& image, SurfaceMode mode = SurfaceMode::GradientMagnitude) {
  if (image.empty()) throw Error(ErrorKind::Config, "make_surface: empty image");
  if (mode == SurfaceMode::RawIntensity) return image;
  const int w = image.width();
  const int h = image.height();
  Grid<double> mag(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (image(std::min(x + 1, w - 1), y) - image(std::max(x - 1, 0), y));
      const double gy = 0.5 * (image(x, std::min(y + 1, h - 1)) - image(x, std::max(y - 1, 0)));
      mag(x, y) = std::hypot(gx, gy);
    }
  const auto k = gaussian_kernel(1.5, 7);
  TerrainSurface s = convolve_separable(mag, k);
  for (double& v : s.data()) v = std::max(v, 0.0);
  return s;
}

inline std::pair<int, int> pixel_of(Point2 p) {
  return {static_cast<int>(std::floor(p.x + 0.5)), static_cast<int>(std::floor(p.y + 0.5))};
}

namespace detail {

/// Moves a marker that sits on a barrier to the nearest free pixel within 3 px.
inline std::pair<int, int> place_marker(const RidgeMask& barriers, int w, int h, Point2 p, std::size_t index) {
  const auto [mx, my] = pixel_of(p);
  if (mx < 0 || my < 0 || mx >= w || my >= h)
    throw Error(ErrorKind::OutOfBounds, "watershed: marker " + std::to_string(index) + " outside the image");
  if (barriers.empty() || !barriers(mx, my)) return {mx, my};
  double best = 10.0;
  std::pair<int, int> found{-1, -1};
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx) {
      const int x = mx + dx;
      const int y = my + dy;
      const double d = std::hypot(dx, dy);
      if (d > 3.0 || !barriers.in_bounds(x, y) || barriers(x, y)) continue;
      if (d < best) {
        best = d;
        found = {x, y};
      }
    }
  if (found.first < 0)
    throw Error(ErrorKind::IsolatedMarker,
                "watershed: marker for instance " + std::to_string(index) + " is enclosed by barriers");
  return found;
}

}  // namespace detail

/// Meyer priority flood. Markers are pushed first in index order; the pixel
/// with the lowest height is popped next, ties going to the earliest push.
/// A popped pixel takes the label it was pushed with unless already
/// labeled, then pushes its free 4-neighbors keyed by their own heights.
inline BasinLabelMap watershed(const TerrainSurface& surface, std::span<const Point2> markers,
                               const RidgeMask& barriers, BarrierMode mode = BarrierMode::Wall) {
  if (markers.empty()) throw Error(ErrorKind::EmptyAnnotation, "watershed: no markers");
  const int w = surface.width();
  const int h = surface.height();
  if (!barriers.empty() && (barriers.width() != w || barriers.height() != h))
    throw Error(ErrorKind::Config, "watershed: barrier mask size differs from surface");
  BasinLabelMap labels(w, h, kUnassigned);
  if (!barriers.empty())
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (barriers[i]) labels[i] = kBarrier;

  struct Entry {
    double height;
    std::uint64_t seq;
    std::uint32_t pixel;
    std::int32_t label;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.height > b.height || (a.height == b.height && a.seq > b.seq);
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Later> open;
  std::uint64_t seq = 0;
  auto push = [&](int x, int y, std::int32_t label) {
    const auto idx = static_cast<std::uint32_t>(labels.index(x, y));
    open.push({surface[idx], seq++, idx, label});
  };
  auto push_free_neighbors = [&](int x, int y, std::int32_t label) {
    constexpr int dx[4] = {1, -1, 0, 0};
    constexpr int dy[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k];
      const int ny = y + dy[k];
      if (labels.in_bounds(nx, ny) && labels(nx, ny) == kUnassigned) push(nx, ny, label);
    }
  };

  for (std::size_t i = 0; i < markers.size(); ++i) {
    const auto [mx, my] = detail::place_marker(barriers, w, h, markers[i], i);
    push(mx, my, static_cast<std::int32_t>(i));
  }
  if (mode == BarrierMode::BackgroundSeeds) {
    if (!barriers.empty())
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (barriers(x, y)) push_free_neighbors(x, y, kBackground);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if ((x == 0 || y == 0 || x == w - 1 || y == h - 1) && labels(x, y) == kUnassigned)
          push(x, y, kBackground);
  }

  while (!open.empty()) {
    const Entry e = open.top();
    open.pop();
    if (labels[e.pixel] != kUnassigned) continue;
    labels[e.pixel] = e.label;
    const int x = static_cast<int>(e.pixel % static_cast<std::uint32_t>(w));
    const int y = static_cast<int>(e.pixel / static_cast<std::uint32_t>(w));
    push_free_neighbors(x, y, e.label);
  }
  return labels;
}

/// Pixel coordinates of every basin, indexed by marker label.
inline std::vector<std::vector<Point2>> basin_pixels(const BasinLabelMap& labels, std::size_t marker_count) {
  std::vector<std::vector<Point2>> out(marker_count);
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x) {
      const auto l = labels(x, y);
      if (l >= 0 && static_cast<std::size_t>(l) < marker_count)
        out[static_cast<std::size_t>(l)].push_back({static_cast<double>(x), static_cast<double>(y)});
    }
  return out;
}

/// Width/height regression target. Always treated as a constant by
/// gradient computations.
struct WidthHeightTarget {
  double w = 1.0;
  double h = 1.0;
  /// True when no evidence was available and a fallback value was used.
  bool fallback = false;
};

/// Twice the componentwise maximum of |R^T (p - c)| over the basin, floored at 1 px.
inline WidthHeightTarget watershed_wh_target(std::span<const Point2> basin, const RBox& b) {
  if (basin.empty()) return {1.0, 1.0, true};
  const auto [c, s] = cos_sin(b.theta);
  double mu = 0.0;
  double mv = 0.0;
  for (const Point2& p : basin) {
    const double dx = p.x - b.cx;
    const double dy = p.y - b.cy;
    mu = std::max(mu, std::abs(c * dx + s * dy));
    mv = std::max(mv, std::abs(-s * dx + c * dy));
  }
  return {std::max(2.0 * mu, 1.0), std::max(2.0 * mv, 1.0), false};
}

/// GWD loss between the unrotated zero-mean Gaussians of the box size and
/// the target size.
inline double voronoi_watershed_loss(const RBox& b, const WidthHeightTarget& t, GwdForm form = GwdForm::Log1p) {
  const Gaussian2D pred{{}, Cov2::diag(0.25 * b.w * b.w, 0.25 * b.h * b.h)};
  const Gaussian2D target{{}, Cov2::diag(0.25 * t.w * t.w, 0.25 * t.h * t.h)};
  return gwd_loss(pred, target, form);
}

/// For commuting diagonal covariances d^2 = (w - w_t)^2 / 4 + (h - h_t)^2 / 4.
inline BoxGrad voronoi_watershed_loss_grad(const RBox& b, const WidthHeightTarget& t,
                                           GwdForm form = GwdForm::Log1p) {
  const double du = 0.5 * (b.w - t.w);
  const double dv = 0.5 * (b.h - t.h);
  const double slope = gwd_slope(du * du + dv * dv, form);
  return {slope * 2.0 * du * 0.5 * b.w, slope * 2.0 * dv * 0.5 * b.h, 0.0};
}

}  // namespace p2rb
