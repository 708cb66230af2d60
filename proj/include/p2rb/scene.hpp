// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "p2rb/error.hpp"
#include "p2rb/geometry.hpp"
#include "p2rb/grid.hpp"

namespace p2rb {

struct PointInstance {
  Point2 point;
  int class_id = 0;
};

/// An image with one annotated point per object: the only supervision.
struct SceneAnnotation {
  Image image;
  std::vector<PointInstance> instances;

  std::vector<Point2> points() const {
    std::vector<Point2> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) out.push_back(inst.point);
    return out;
  }
};

inline void validate(const SceneAnnotation& scene) {
  if (scene.image.empty()) throw Error(ErrorKind::Config, "scene: empty image");
  if (scene.instances.empty()) throw Error(ErrorKind::EmptyAnnotation, "scene: no annotated instances");
  for (std::size_t i = 0; i < scene.instances.size(); ++i) {
    const Point2 p = scene.instances[i].point;
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0 ||
        p.x > scene.image.width() - 1 || p.y > scene.image.height() - 1)
      throw Error(ErrorKind::OutOfBounds, "scene: point " + std::to_string(i) + " outside the image");
  }
}

}  // namespace p2rb
