// SPDX-License-Identifier: Apache-2.0
//
// Deterministic dense rotated-rectangle scenes with exact ground truth.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "p2rb/error.hpp"
#include "p2rb/geometry.hpp"
#include "p2rb/grid.hpp"
#include "p2rb/scene.hpp"

namespace p2rb {

enum class SynthLayout { Grid, RandomPacked };

struct SynthConfig {
  int width = 512;
  int height = 512;
  int min_count = 20;
  int max_count = 60;
  /// Range of the long side in px.
  double min_size = 18.0;
  double max_size = 48.0;
  /// Range of long side / short side.
  double min_aspect = 1.2;
  double max_aspect = 3.0;
  SynthLayout layout = SynthLayout::Grid;
  /// Largest rotated IoU allowed between any two objects.
  double max_iou = 0.0;
  /// Clearance enforced between objects, in px.
  double min_gap = 3.0;
  /// Angle spread around the scene's base angle for grid layouts (radians).
  double grid_angle_jitter = 0.25;
  double background = 0.5;
  double contrast = 60.0 / 255.0;
  double noise_sigma = 8.0 / 255.0;
  /// Point jitter: uniform in [-j H, +j H] per axis, H the object height.
  double point_jitter = 0.0;
  int class_count = 1;
  std::uint64_t seed = 0;
};

inline void validate(const SynthConfig& c) {
  const bool ok = c.width >= 8 && c.height >= 8 && c.min_count >= 0 && c.max_count >= c.min_count &&
                  c.min_size > 1.0 && c.max_size >= c.min_size && c.min_aspect >= 1.0 &&
                  c.max_aspect >= c.min_aspect && c.max_iou >= 0.0 && c.max_iou <= 0.3 && c.min_gap >= 0.0 &&
                  c.contrast >= 0.0 && c.noise_sigma >= 0.0 && c.point_jitter >= 0.0 && c.class_count >= 1;
  if (!ok) throw Error(ErrorKind::Config, "synth: invalid configuration");
}

struct SynthScene {
  Image image;
  std::vector<RBox> gt_boxes;
  SceneAnnotation annotation;
};

namespace detail {

inline bool inside_with_margin(const RBox& b, int width, int height, double margin) {
  for (const Point2& p : rbox_to_quad(b).pts)
    if (p.x < margin || p.y < margin || p.x > width - 1 - margin || p.y > height - 1 - margin) return false;
  return true;
}

inline bool compatible(const RBox& b, const std::vector<RBox>& placed, const SynthConfig& c) {
  const bool need_gap = c.max_iou <= 0.0 && c.min_gap > 0.0;
  RBox grown = b;
  grown.w += c.min_gap;
  grown.h += c.min_gap;
  for (const RBox& o : placed) {
    if (rotated_iou(b, o) > c.max_iou) return false;
    if (need_gap) {
      RBox og = o;
      og.w += c.min_gap;
      og.h += c.min_gap;
      if (intersection_area(grown, og) > 0.0) return false;
    }
  }
  return true;
}

/// Paints the box with 4x4 supersampled coverage over unit pixel squares.
inline void render_box(Image& img, const RBox& b, double value) {
  const PolyQuad q = rbox_to_quad(b);
  double x0 = q.pts[0].x, x1 = x0, y0 = q.pts[0].y, y1 = y0;
  for (const Point2& p : q.pts) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  const double c = std::cos(b.theta);
  const double s = std::sin(b.theta);
  const int ix0 = std::max(0, static_cast<int>(std::floor(x0)));
  const int ix1 = std::min(img.width() - 1, static_cast<int>(std::ceil(x1)));
  const int iy0 = std::max(0, static_cast<int>(std::floor(y0)));
  const int iy1 = std::min(img.height() - 1, static_cast<int>(std::ceil(y1)));
  constexpr int kSub = 4;
  for (int y = iy0; y <= iy1; ++y)
    for (int x = ix0; x <= ix1; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy)
        for (int sx = 0; sx < kSub; ++sx) {
          const double px = x - 0.5 + (sx + 0.5) / kSub - b.cx;
          const double py = y - 0.5 + (sy + 0.5) / kSub - b.cy;
          const double u = c * px + s * py;
          const double v = -s * px + c * py;
          if (std::abs(u) <= 0.5 * b.w && std::abs(v) <= 0.5 * b.h) ++hits;
        }
      if (hits == 0) continue;
      const double a = static_cast<double>(hits) / (kSub * kSub);
      img(x, y) = (1.0 - a) * img(x, y) + a * value;
    }
}

template <class Rng>
RBox sample_shape(Rng& rng, const SynthConfig& c, double cx, double cy, double theta) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double longer = c.min_size + (c.max_size - c.min_size) * u01(rng);
  const double aspect = c.min_aspect + (c.max_aspect - c.min_aspect) * u01(rng);
  return canonicalize({cx, cy, longer, std::max(longer / aspect, 2.0), theta});
}

}  // namespace detail

inline SynthScene synth_scene(const SynthConfig& cfg) {
  validate(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> count_dist(cfg.min_count, cfg.max_count);
  const int count = count_dist(rng);
  const int W = cfg.width;
  const int H = cfg.height;
  constexpr double kMargin = 2.0;

  std::vector<RBox> boxes;
  boxes.reserve(static_cast<std::size_t>(count));
  if (cfg.layout == SynthLayout::Grid && count > 0) {
    const int cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(count * static_cast<double>(W) / H))));
    const int rows = (count + cols - 1) / cols;
    const double cw = (W - 2.0 * kMargin) / cols;
    const double ch = (H - 2.0 * kMargin) / rows;
    const double base = kPi * (u01(rng) - 0.5);
    for (int k = 0; k < count; ++k) {
      const int gx = k % cols;
      const int gy = k / cols;
      bool placed = false;
      for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
        const double theta = base + cfg.grid_angle_jitter * (2.0 * u01(rng) - 1.0);
        RBox b = detail::sample_shape(rng, cfg, 0.0, 0.0, theta);
        // Shrink until the axis-aligned extent fits the cell with clearance.
        const double ex = std::abs(b.w * std::cos(b.theta)) + std::abs(b.h * std::sin(b.theta));
        const double ey = std::abs(b.w * std::sin(b.theta)) + std::abs(b.h * std::cos(b.theta));
        const double fit = std::min({1.0, (cw - cfg.min_gap - 2.0) / ex, (ch - cfg.min_gap - 2.0) / ey});
        if (fit <= 0.0) break;
        b.w *= fit;
        b.h *= fit;
        const double ex2 = ex * fit;
        const double ey2 = ey * fit;
        const double slack_x = std::max(0.0, cw - cfg.min_gap - ex2);
        const double slack_y = std::max(0.0, ch - cfg.min_gap - ey2);
        b.cx = kMargin + (gx + 0.5) * cw + slack_x * (u01(rng) - 0.5) * 0.5;
        b.cy = kMargin + (gy + 0.5) * ch + slack_y * (u01(rng) - 0.5) * 0.5;
        if (b.h < 2.0) break;
        if (detail::inside_with_margin(b, W, H, kMargin) && detail::compatible(b, boxes, cfg)) {
          boxes.push_back(b);
          placed = true;
        }
      }
      if (!placed)
        throw Error(ErrorKind::Packing, "synth: could not place object " + std::to_string(k) +
                                            " in its grid cell; lower the density or object size");
    }
  } else {
    for (int k = 0; k < count; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
        const double theta = kPi * (u01(rng) - 0.5);
        RBox b = detail::sample_shape(rng, cfg, 0.0, 0.0, theta);
        b.cx = kMargin + (W - 1 - 2.0 * kMargin) * u01(rng);
        b.cy = kMargin + (H - 1 - 2.0 * kMargin) * u01(rng);
        if (detail::inside_with_margin(b, W, H, kMargin) && detail::compatible(b, boxes, cfg)) {
          boxes.push_back(b);
          placed = true;
        }
      }
      if (!placed)
        throw Error(ErrorKind::Packing, "synth: packing failed after 10000 attempts for object " +
                                            std::to_string(k) + "; lower the density");
    }
  }

  SynthScene scene;
  scene.image = Image(W, H, cfg.background);
  std::uniform_int_distribution<int> class_dist(0, cfg.class_count - 1);
  // Separate stream so that the image does not depend on the jitter setting.
  std::mt19937_64 jitter_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  for (const RBox& b : boxes) {
    const double sign = u01(rng) < 0.5 ? 1.0 : -1.0;
    const double value = std::clamp(cfg.background + sign * (cfg.contrast + 0.15 * u01(rng)), 0.0, 1.0);
    detail::render_box(scene.image, b, value);
    const int class_id = class_dist(rng);
    Point2 p = b.center();
    if (cfg.point_jitter > 0.0) {
      const double r = cfg.point_jitter * b.h;
      p.x += r * (2.0 * u01(jitter_rng) - 1.0);
      p.y += r * (2.0 * u01(jitter_rng) - 1.0);
      p.x = std::clamp(p.x, 0.0, W - 1.0);
      p.y = std::clamp(p.y, 0.0, H - 1.0);
    }
    scene.annotation.instances.push_back({p, class_id});
  }
  if (cfg.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (double& v : scene.image.data()) v += noise(rng);
  }
  for (double& v : scene.image.data()) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  scene.gt_boxes = std::move(boxes);
  scene.annotation.image = scene.image;
  return scene;
}

}  // namespace p2rb
