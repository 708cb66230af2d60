// SPDX-License-Identifier: Apache-2.0
//
// Raster Voronoi partition of the image induced by the annotated points.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "p2rb/error.hpp"
#include "p2rb/geometry.hpp"
#include "p2rb/grid.hpp"

namespace p2rb {

/// Per-pixel index of the nearest site (ties to the lowest index).
using CellLabelMap = Grid<std::int32_t>;
/// Nonzero where the pixel borders another cell.
using RidgeMask = Grid<std::uint8_t>;

struct VoronoiResult {
  CellLabelMap labels;
  RidgeMask ridges;
  /// representative[i] is the cell label used for input point i. Points
  /// closer than 0.5 px to an earlier point are merged into its cell.
  std::vector<int> representative;
  std::vector<std::string> warnings;
};

namespace detail {

/// Uniform bucket grid over the sites for ring-by-ring nearest-site search.
class SiteBuckets {
 public:
  SiteBuckets(std::span<const Point2> sites, std::span<const int> ids, int width, int height)
      : sites_(sites), ids_(ids) {
    const double area = static_cast<double>(width) * height;
    cell_ = std::max(4.0, std::sqrt(area / std::max<std::size_t>(ids.size(), 1)));
    nx_ = std::max(1, static_cast<int>(std::ceil(width / cell_)) + 1);
    ny_ = std::max(1, static_cast<int>(std::ceil(height / cell_)) + 1);
    buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (int id : ids) {
      const auto [bx, by] = bucket_of(sites[id].x, sites[id].y);
      buckets_[static_cast<std::size_t>(by) * nx_ + bx].push_back(id);
    }
  }

  /// Lowest-index site among those at minimal squared distance from (x, y).
  int nearest(int x, int y) const {
    const auto [bx, by] = bucket_of(x, y);
    double best = std::numeric_limits<double>::infinity();
    int best_id = -1;
    const int max_ring = std::max(nx_, ny_);
    for (int r = 0; r <= max_ring; ++r) {
      for (int cy = by - r; cy <= by + r; ++cy) {
        if (cy < 0 || cy >= ny_) continue;
        const bool edge_row = (cy == by - r || cy == by + r);
        const int step = edge_row ? 1 : 2 * r;
        for (int cx = bx - r; cx <= bx + r; cx += std::max(step, 1)) {
          if (cx < 0 || cx >= nx_) continue;
          for (int id : buckets_[static_cast<std::size_t>(cy) * nx_ + cx]) {
            const double dx = x - sites_[id].x;
            const double dy = y - sites_[id].y;
            const double d2 = dx * dx + dy * dy;
            if (d2 < best || (d2 == best && id < best_id)) {
              best = d2;
              best_id = id;
            }
          }
        }
      }
      // Any site outside the searched block is at least this far away.
      const double lo_x = x - (bx - r) * cell_;
      const double hi_x = (bx + r + 1) * cell_ - x;
      const double lo_y = y - (by - r) * cell_;
      const double hi_y = (by + r + 1) * cell_ - y;
      const double bound = std::min({lo_x, hi_x, lo_y, hi_y});
      if (best_id >= 0 && best < bound * bound) break;
    }
    return best_id;
  }

 private:
  std::pair<int, int> bucket_of(double x, double y) const {
    const int bx = std::clamp(static_cast<int>(std::floor(x / cell_)), 0, nx_ - 1);
    const int by = std::clamp(static_cast<int>(std::floor(y / cell_)), 0, ny_ - 1);
    return {bx, by};
  }

  std::span<const Point2> sites_;
  std::span<const int> ids_;
  double cell_ = 1.0;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace detail

/// A pixel is a ridge pixel when its right or lower neighbor belongs to a
/// different cell. This yields one-pixel-thick ridges that still cut every
/// 4-connected path between two cells.
inline RidgeMask ridges_from_labels(const CellLabelMap& labels) {
  RidgeMask ridges(labels.width(), labels.height(), 0);
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const auto l = labels(x, y);
      if ((x + 1 < labels.width() && labels(x + 1, y) != l) ||
          (y + 1 < labels.height() && labels(x, y + 1) != l))
        ridges(x, y) = 1;
    }
  }
  return ridges;
}

inline VoronoiResult voronoi_partition(std::span<const Point2> points, int width, int height) {
  if (points.empty()) throw Error(ErrorKind::EmptyAnnotation, "voronoi: no annotated points");
  if (width < 1 || height < 1) throw Error(ErrorKind::Config, "voronoi: image size must be positive");
  VoronoiResult out;
  out.representative.resize(points.size());
  std::vector<int> unique_ids;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point2 p = points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0 || p.x > width - 1 ||
        p.y > height - 1)
      throw Error(ErrorKind::OutOfBounds, "voronoi: point " + std::to_string(i) + " outside the image");
    int rep = static_cast<int>(i);
    for (int u : unique_ids) {
      if (norm(points[u] - p) < 0.5) {
        rep = u;
        break;
      }
    }
    out.representative[i] = rep;
    if (rep == static_cast<int>(i)) {
      unique_ids.push_back(rep);
    } else {
      out.warnings.push_back("duplicate point " + std::to_string(i) + " merged into " + std::to_string(rep));
    }
  }

  const detail::SiteBuckets buckets(points, unique_ids, width, height);
  out.labels = CellLabelMap(width, height, 0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out.labels(x, y) = buckets.nearest(x, y);
  out.ridges = ridges_from_labels(out.labels);
  return out;
}

}  // namespace p2rb
