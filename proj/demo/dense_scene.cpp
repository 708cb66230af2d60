// SPDX-License-Identifier: Apache-2.0
//
// Renders one dense synthetic scene, fits boxes from its center points and
// prints how close they land to the ground truth.
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "p2rb/fitter.hpp"
#include "p2rb/synth.hpp"

int main(int argc, char** argv) {
  p2rb::SynthConfig sc;
  sc.seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  sc.min_count = sc.max_count = 30;
  const p2rb::SynthScene scene = p2rb::synth_scene(sc);

  const p2rb::FitResult fit = p2rb::fit_scene(scene.annotation, p2rb::FitConfig{});
  std::vector<double> ious;
  for (std::size_t i = 0; i < fit.rboxes.size(); ++i) ious.push_back(p2rb::rotated_iou(fit.rboxes[i], scene.gt_boxes[i]));
  std::sort(ious.begin(), ious.end());

  std::printf("objects: %zu\n", ious.size());
  std::printf("loss: %.4f -> %.4f\n", fit.trace.front().loss.total, fit.trace.back().loss.total);
  std::printf("IoU min/median/max: %.3f / %.3f / %.3f\n", ious.front(), ious[ious.size() / 2], ious.back());
  for (const auto& w : fit.warnings) std::printf("warning: %s\n", w.c_str());
  return 0;
}
