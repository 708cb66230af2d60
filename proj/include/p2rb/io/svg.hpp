// SPDX-License-Identifier: Apache-2.0
//
// SVG overlays: one polygon per box, predictions and optional ground truth.
#pragma once

#include <string>
#include <vector>

#include "p2rb/geometry.hpp"
#include "p2rb/io/text.hpp"

namespace p2rb::io {

struct SvgLayers {
  std::vector<RBox> predictions;
  std::vector<RBox> ground_truth;
  std::vector<Point2> points;
  /// Optional href of a background image.
  std::string background;
};

inline std::string svg_polygon(const RBox& b, const char* cls) {
  std::string s = "  <polygon class=\"";
  s += cls;
  s += "\" points=\"";
  const PolyQuad q = rbox_to_quad(b);
  for (std::size_t i = 0; i < 4; ++i) s += (i ? " " : "") + fmt2(q.pts[i].x) + "," + fmt2(q.pts[i].y);
  return s + "\"/>\n";
}

inline std::string render_svg(int width, int height, const SvgLayers& layers) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" width=\"" +
                  std::to_string(width) + "\" height=\"" + std::to_string(height) + "\" viewBox=\"-0.5 -0.5 " +
                  std::to_string(width) + " " + std::to_string(height) + "\">\n";
  s += "  <style>.gt{fill:none;stroke:#00c853;stroke-width:1}.pred{fill:none;stroke:#ff1744;stroke-width:1}"
       ".pt{fill:#2979ff}</style>\n";
  if (!layers.background.empty())
    s += "  <image x=\"-0.5\" y=\"-0.5\" width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" xlink:href=\"" + layers.background + "\"/>\n";
  for (const RBox& b : layers.ground_truth) s += svg_polygon(b, "gt");
  for (const RBox& b : layers.predictions) s += svg_polygon(b, "pred");
  for (const Point2& p : layers.points)
    s += "  <circle class=\"pt\" cx=\"" + fmt2(p.x) + "\" cy=\"" + fmt2(p.y) + "\" r=\"1.5\"/>\n";
  return s + "</svg>\n";
}

}  // namespace p2rb::io
