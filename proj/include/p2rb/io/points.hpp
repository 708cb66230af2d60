// SPDX-License-Identifier: Apache-2.0
//
// Point annotations, one "x y category" record per line.
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "p2rb/error.hpp"
#include "p2rb/geometry.hpp"
#include "p2rb/io/text.hpp"
#include "p2rb/scene.hpp"

namespace p2rb::io {

struct PointRecord {
  Point2 point;
  std::string category;
};

inline std::vector<PointRecord> parse_points(std::string_view text) {
  std::vector<PointRecord> out;
  for_each_record(text, [&](int line_no, std::string_view line) {
    const auto tok = split_ws(line);
    if (tok.size() != 3) throw parse_error(line_no, "expected \"x y category\"");
    PointRecord r;
    if (!parse_double(tok[0], r.point.x) || !parse_double(tok[1], r.point.y))
      throw parse_error(line_no, "non-numeric coordinate");
    r.category = std::string(tok[2]);
    out.push_back(std::move(r));
  });
  return out;
}

/// Full-precision coordinates so that points survive a round trip exactly.
inline std::string emit_points(const std::vector<PointRecord>& records) {
  std::string out;
  for (const auto& r : records) out += fmt_exact(r.point.x) + ' ' + fmt_exact(r.point.y) + ' ' + r.category + '\n';
  return out;
}

/// Category tokens in order of first appearance; the index is the class id.
struct CategoryTable {
  std::vector<std::string> names;

  int id(const std::string& name) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    names.push_back(name);
    return static_cast<int>(names.size()) - 1;
  }
  const std::string& name(int id) const { return names.at(static_cast<std::size_t>(id)); }
};

/// Builds a scene and checks every point against the image bounds.
inline SceneAnnotation make_scene(Image image, const std::vector<PointRecord>& records, CategoryTable& table) {
  SceneAnnotation scene;
  scene.image = std::move(image);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Point2 p = records[i].point;
    if (p.x < 0.0 || p.y < 0.0 || p.x > scene.image.width() - 1 || p.y > scene.image.height() - 1)
      throw Error(ErrorKind::OutOfBounds, "point record " + std::to_string(i + 1) + " (" + fmt2(p.x) + ", " +
                                              fmt2(p.y) + ") lies outside the " + std::to_string(scene.image.width()) +
                                              "x" + std::to_string(scene.image.height()) + " image");
    scene.instances.push_back({p, table.id(records[i].category)});
  }
  return scene;
}

}  // namespace p2rb::io
