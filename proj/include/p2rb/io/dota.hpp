// SPDX-License-Identifier: Apache-2.0
//
// DOTA-style oriented box lists:
//   x1 y1 x2 y2 x3 y3 x4 y4 category difficulty
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "p2rb/error.hpp"
#include "p2rb/geometry.hpp"
#include "p2rb/io/text.hpp"

namespace p2rb::io {

struct DotaRecord {
  RBox box;
  std::string category;
  int difficulty = 0;
};

struct DotaParseResult {
  std::vector<DotaRecord> records;
  std::vector<std::string> warnings;
};

/// Blank lines, '#' comments and single-token "key:value" header lines
/// (imagesource:, gsd:) are skipped. A missing difficulty reads as 0.
inline DotaParseResult parse_dota(std::string_view text) {
  DotaParseResult out;
  for_each_record(text, [&](int line_no, std::string_view line) {
    const auto tok = split_ws(line);
    if (tok.size() == 1 && tok[0].find(':') != std::string_view::npos) return;
    if (tok.size() != 9 && tok.size() != 10)
      throw parse_error(line_no, "expected 8 coordinates, a category and a difficulty, got " +
                                     std::to_string(tok.size()) + " fields");
    PolyQuad q;
    for (std::size_t k = 0; k < 4; ++k) {
      double x = 0.0, y = 0.0;
      if (!parse_double(tok[2 * k], x) || !parse_double(tok[2 * k + 1], y))
        throw parse_error(line_no, "non-numeric coordinate");
      q.pts[k] = {x, y};
    }
    DotaRecord r;
    r.category = std::string(tok[8]);
    if (tok.size() == 10) {
      long long d = 0;
      if (!parse_int(tok[9], d)) throw parse_error(line_no, "non-integer difficulty");
      r.difficulty = static_cast<int>(d);
    }
    try {
      r.box = quad_to_rbox(q);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateGeometry) throw;
      out.warnings.push_back("line " + std::to_string(line_no) + ": degenerate quad skipped");
      return;
    }
    out.records.push_back(std::move(r));
  });
  return out;
}

/// One line per record; corners from rbox_to_quad at two decimals.
inline std::string emit_dota(const std::vector<DotaRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    const PolyQuad q = rbox_to_quad(r.box);
    for (const Point2& p : q.pts) out += fmt2(p.x) + ' ' + fmt2(p.y) + ' ';
    out += r.category + ' ' + std::to_string(r.difficulty) + '\n';
  }
  return out;
}

}  // namespace p2rb::io
