// SPDX-License-Identifier: Apache-2.0
//
// Evaluation reports as "key=value" lines.
#pragma once

#include <string>

#include "p2rb/eval.hpp"
#include "p2rb/io/trace.hpp"

namespace p2rb::io {

inline std::string format_stats(const std::string& prefix, const EvalStats& s) {
  std::string out;
  auto kv = [&](const char* k, const std::string& v) { out += prefix + k + "=" + v + "\n"; };
  kv("gt", std::to_string(s.gt_count));
  kv("pred", std::to_string(s.pred_count));
  kv("matched", std::to_string(s.matched));
  kv("unmatched_gt", std::to_string(s.unmatched_gt));
  kv("unmatched_pred", std::to_string(s.unmatched_pred));
  kv("precision", fmt_g(s.precision));
  kv("recall", fmt_g(s.recall));
  kv("ap50", fmt_g(s.ap50));
  kv("mean_iou", fmt_g(s.mean_iou));
  kv("median_iou", fmt_g(s.median_iou));
  kv("mean_angle_error_deg", fmt_g(s.mean_angle_error));
  kv("angle_pairs", std::to_string(s.angle_count));
  return out;
}

/// Overall keys first, then "class.<name>.<key>" for every class in name order.
inline std::string format_report(const EvalReport& r) {
  std::string out = format_stats("", r.overall);
  for (const auto& [name, s] : r.per_class) out += format_stats("class." + name + ".", s);
  return out;
}

}  // namespace p2rb::io
