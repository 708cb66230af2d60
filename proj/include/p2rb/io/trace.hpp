// SPDX-License-Identifier: Apache-2.0
//
// Loss breakdowns and fit traces as "key=value" lines.
#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "p2rb/fitter.hpp"

namespace p2rb::io {

inline std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

/// One line: "total=... overlap=... watershed=... edge=... ss=... tightness=...".
inline std::string format_breakdown(const LossBreakdown& l) {
  return "total=" + fmt_g(l.total) + " overlap=" + fmt_g(l.overlap) + " watershed=" + fmt_g(l.watershed) +
         " edge=" + fmt_g(l.edge) + " ss=" + fmt_g(l.ss) + " tightness=" + fmt_g(l.tightness);
}

inline std::string format_trace(const std::vector<TraceEntry>& trace) {
  std::string out;
  for (const auto& e : trace) out += "iteration=" + std::to_string(e.iteration) + ' ' + format_breakdown(e.loss) + '\n';
  return out;
}

}  // namespace p2rb::io
