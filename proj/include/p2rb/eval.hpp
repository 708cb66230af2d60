// SPDX-License-Identifier: Apache-2.0
//
// Score-free evaluation of predicted boxes against ground truth.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "p2rb/geometry.hpp"

namespace p2rb {

struct LabeledBox {
  RBox box;
  std::string category;
};

struct EvalStats {
  std::size_t gt_count = 0;
  std::size_t pred_count = 0;
  std::size_t matched = 0;
  std::size_t unmatched_gt = 0;
  std::size_t unmatched_pred = 0;
  double precision = 0.0;
  double recall = 0.0;
  /// Single operating point: precision * recall.
  double ap50 = 0.0;
  /// Over ground-truth boxes; a box left without a partner counts as 0.
  double mean_iou = 0.0;
  double median_iou = 0.0;
  /// Degrees, pi-wrapped, over matches whose ground truth has aspect >= 1.2.
  double mean_angle_error = 0.0;
  std::size_t angle_count = 0;
};

struct EvalReport {
  EvalStats overall;
  std::map<std::string, EvalStats> per_class;
};

inline constexpr double kMatchIou = 0.5;
inline constexpr double kAngleAspect = 1.2;

namespace detail {

struct Assignment {
  std::size_t gt = 0;
  std::size_t pred = 0;
  double iou = 0.0;
};

/// One-to-one greedy assignment over all overlapping pairs, highest IoU
/// first (ties by ground-truth then prediction index).
inline std::vector<Assignment> greedy_assign(const std::vector<RBox>& gt, const std::vector<RBox>& pred) {
  std::vector<Assignment> pairs;
  for (std::size_t g = 0; g < gt.size(); ++g)
    for (std::size_t p = 0; p < pred.size(); ++p) {
      const double iou = rotated_iou(gt[g], pred[p]);
      if (iou > 0.0) pairs.push_back({g, p, iou});
    }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Assignment& a, const Assignment& b) { return a.iou > b.iou; });
  std::vector<char> gt_used(gt.size(), 0), pred_used(pred.size(), 0);
  std::vector<Assignment> out;
  for (const auto& a : pairs) {
    if (gt_used[a.gt] || pred_used[a.pred]) continue;
    gt_used[a.gt] = pred_used[a.pred] = 1;
    out.push_back(a);
  }
  return out;
}

struct ClassAccumulator {
  std::size_t gt_count = 0;
  std::size_t pred_count = 0;
  std::size_t matched = 0;
  std::vector<double> ious;
  double angle_sum = 0.0;
  std::size_t angle_count = 0;

  void add(const ClassAccumulator& o) {
    gt_count += o.gt_count;
    pred_count += o.pred_count;
    matched += o.matched;
    ious.insert(ious.end(), o.ious.begin(), o.ious.end());
    angle_sum += o.angle_sum;
    angle_count += o.angle_count;
  }

  EvalStats finish() const {
    EvalStats s;
    s.gt_count = gt_count;
    s.pred_count = pred_count;
    s.matched = matched;
    s.unmatched_gt = gt_count - matched;
    s.unmatched_pred = pred_count - matched;
    s.precision = pred_count ? static_cast<double>(matched) / pred_count : 0.0;
    s.recall = gt_count ? static_cast<double>(matched) / gt_count : 0.0;
    s.ap50 = s.precision * s.recall;
    if (!ious.empty()) {
      double sum = 0.0;
      for (double v : ious) sum += v;
      s.mean_iou = sum / static_cast<double>(ious.size());
      std::vector<double> sorted = ious;
      std::sort(sorted.begin(), sorted.end());
      const std::size_t n = sorted.size();
      s.median_iou = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    }
    s.angle_count = angle_count;
    s.mean_angle_error = angle_count ? angle_sum / static_cast<double>(angle_count) : 0.0;
    return s;
  }
};

}  // namespace detail

/// Matching is per class. A pair counts as a match when its IoU is at least
/// 0.5. Without confidence scores AP50 is precision * recall at the single
/// operating point.
inline EvalReport evaluate(const std::vector<LabeledBox>& pred, const std::vector<LabeledBox>& gt) {
  std::map<std::string, std::pair<std::vector<RBox>, std::vector<RBox>>> by_class;
  for (const auto& g : gt) by_class[g.category].first.push_back(g.box);
  for (const auto& p : pred) by_class[p.category].second.push_back(p.box);

  EvalReport report;
  detail::ClassAccumulator total;
  for (const auto& [name, lists] : by_class) {
    const auto& [gts, preds] = lists;
    detail::ClassAccumulator acc;
    acc.gt_count = gts.size();
    acc.pred_count = preds.size();
    std::vector<double> gt_iou(gts.size(), 0.0);
    for (const auto& a : detail::greedy_assign(gts, preds)) {
      gt_iou[a.gt] = a.iou;
      if (a.iou < kMatchIou) continue;
      ++acc.matched;
      const RBox& g = gts[a.gt];
      if (std::max(g.w, g.h) >= kAngleAspect * std::min(g.w, g.h)) {
        acc.angle_sum += std::abs(angle_diff_mod_pi(preds[a.pred].theta, g.theta)) * 180.0 / kPi;
        ++acc.angle_count;
      }
    }
    acc.ious = std::move(gt_iou);
    report.per_class[name] = acc.finish();
    total.add(acc);
  }
  report.overall = total.finish();
  return report;
}

}  // namespace p2rb
