// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "p2rb/fitter.hpp"
#include "p2rb/synth.hpp"

using namespace p2rb;

namespace {

SynthScene small_scene(std::uint64_t seed, int count = 12) {
  SynthConfig c;
  c.width = c.height = 192;
  c.min_count = c.max_count = count;
  c.seed = seed;
  return synth_scene(c);
}

SceneAnnotation scene_of(std::vector<Point2> pts, int w = 64, int h = 64) {
  SceneAnnotation s;
  s.image = Image(w, h, 0.5);
  for (const auto& p : pts) s.instances.push_back({p, 0});
  return s;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(InitParams, NearestNeighborSizes) {
  const FitConfig cfg;
  auto two = init_params(scene_of({{10, 10}, {50, 10}}), cfg);
  EXPECT_DOUBLE_EQ(two[0].w, 20);
  EXPECT_DOUBLE_EQ(two[1].h, 20);
  EXPECT_DOUBLE_EQ(two[0].theta, 0);
  EXPECT_EQ(two[0].center(), (Point2{10, 10}));
  EXPECT_DOUBLE_EQ(init_params(scene_of({{10, 10}}), cfg)[0].w, 32);
  EXPECT_DOUBLE_EQ(init_params(scene_of({{10, 10}, {14, 10}}), cfg)[0].w, 8);
  EXPECT_DOUBLE_EQ(init_params(scene_of({{0, 0}, {63, 63}}, 64, 64), cfg)[0].w, 44.547727214752491);
}

TEST(TotalLoss, AllWeightsZero) {
  const SynthScene s = small_scene(1);
  FitConfig cfg;
  cfg.weights = {0, 0, 0, 0};
  const SceneCache cache = build_scene_cache(s.annotation, cfg);
  EXPECT_EQ(total_layout_loss(s.gt_boxes, s.annotation, cache, cfg).total, 0.0);
}

TEST(TotalLoss, SingleInstanceHasNoOverlapTerm) {
  const SynthScene s = small_scene(2, 1);
  FitConfig cfg;
  const SceneCache cache = build_scene_cache(s.annotation, cfg);
  const auto l = total_layout_loss(s.gt_boxes, s.annotation, cache, cfg);
  EXPECT_EQ(l.overlap, 0.0);
  EXPECT_NEAR(l.total, cfg.weights.watershed * l.watershed + cfg.weights.edge * l.edge + tightness_weight(cfg) * l.tightness,
              1e-12);
  cfg.tightness_ratio = 0.0;
  const auto m = total_layout_loss(s.gt_boxes, s.annotation, cache, cfg);
  EXPECT_NEAR(m.total, cfg.weights.watershed * m.watershed + cfg.weights.edge * m.edge, 1e-12);
}

TEST(TotalLoss, GroundTruthBeatsInflatedBoxes) {
  for (std::uint64_t seed : {3, 4, 5}) {
    const SynthScene s = small_scene(seed);
    const FitConfig cfg;
    const SceneCache cache = build_scene_cache(s.annotation, cfg);
    auto inflated = s.gt_boxes;
    for (auto& b : inflated) {
      b.w *= 1.5;
      b.h *= 1.5;
    }
    EXPECT_LT(total_layout_loss(s.gt_boxes, s.annotation, cache, cfg).total,
              total_layout_loss(inflated, s.annotation, cache, cfg).total);
  }
}

TEST(TotalLoss, WeightsArePassThrough) {
  const SynthScene s = small_scene(6);
  FitConfig cfg;
  cfg.with_ss = true;
  const SceneCache cache = build_scene_cache(s.annotation, cfg);
  std::mt19937_64 rng(1);
  const SsReference ref = detail::make_ss_reference(s.gt_boxes, cfg, rng);
  const double a = total_layout_loss(s.gt_boxes, s.annotation, cache, cfg, &ref).total;
  FitConfig twice = cfg;
  twice.weights = {2 * cfg.weights.overlap, 2 * cfg.weights.watershed, 2 * cfg.weights.edge, 2 * cfg.weights.ss};
  EXPECT_NEAR(total_layout_loss(s.gt_boxes, s.annotation, cache, twice, &ref).total, 2 * a, 1e-9 * std::abs(a));
}

TEST(TotalLoss, StaleCacheRejected) {
  const SynthScene s = small_scene(7);
  const FitConfig cfg;
  const SceneCache cache = build_scene_cache(s.annotation, cfg);
  SceneAnnotation moved = s.annotation;
  moved.instances[0].point.x += 1.0;
  try {
    total_layout_loss(s.gt_boxes, moved, cache, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::StaleCache);
  }
}

TEST(Gradient, AnalyticAgreesWithFiniteDifferences) {
  const SynthScene s = small_scene(8);
  FitConfig cfg;
  const SceneCache cache = build_scene_cache(s.annotation, cfg);
  auto boxes = init_params(s.annotation, cfg);
  for (std::size_t i = 0; i < boxes.size(); ++i) boxes[i].theta = 0.1 * static_cast<double>(i);
  const auto targets = compute_targets(boxes, cache, cfg);
  const auto an = layout_gradient(boxes, targets, cache, cfg);
  cfg.gradient = GradientMode::FiniteDifference;
  cfg.fd_step = 1e-5;
  const auto fd = layout_gradient(boxes, targets, cache, cfg);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    EXPECT_LT(oracle::rel_err(an[i].d_logw, fd[i].d_logw, 1e-6), 1e-3) << i;
    EXPECT_LT(oracle::rel_err(an[i].d_logh, fd[i].d_logh, 1e-6), 1e-3) << i;
    EXPECT_LT(oracle::rel_err(an[i].d_theta, fd[i].d_theta, 1e-6), 1e-3) << i;
  }
}

TEST(Fit, SingleRectangle) {
  Image img(96, 96, 0.3);
  const RBox gt{48, 48, 40, 16, 0.5};
  detail::render_box(img, gt, 0.8);
  SceneAnnotation s;
  s.image = img;
  s.instances.push_back({gt.center(), 0});
  const FitResult r = fit_scene(s, FitConfig{});
  ASSERT_EQ(r.rboxes.size(), 1u);
  EXPECT_GE(rotated_iou(r.rboxes[0], gt), 0.8);
}

TEST(Fit, GridOfIdenticalRectangles) {
  Image img(240, 240, 0.4);
  SceneAnnotation s;
  std::vector<RBox> gt;
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) {
      const RBox b{24.0 + 48 * c, 24.0 + 48 * r, 34, 14, 0.6};
      detail::render_box(img, b, 0.75);
      gt.push_back(b);
      s.instances.push_back({b.center(), 0});
    }
  s.image = img;
  const FitResult res = fit_scene(s, FitConfig{});
  std::vector<double> ious;
  double max_b = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    ious.push_back(rotated_iou(res.rboxes[i], gt[i]));
    for (std::size_t j = i + 1; j < gt.size(); ++j)
      max_b = std::max(max_b, bhattacharyya_coefficient(rbox_to_gaussian(res.rboxes[i]), rbox_to_gaussian(res.rboxes[j])));
  }
  EXPECT_GE(median(ious), 0.7);
  EXPECT_LT(max_b, 0.3);
}

TEST(Fit, FlatImageKeepsInitialBox) {
  const SceneAnnotation s = scene_of({{32, 32}});
  const FitResult r = fit_scene(s, FitConfig{});
  ASSERT_EQ(r.rboxes.size(), 1u);
  EXPECT_NEAR(r.rboxes[0].w, 32, 1e-9);
  EXPECT_NEAR(r.rboxes[0].h, 32, 1e-9);
  EXPECT_FALSE(r.warnings.empty());
  for (const auto& e : r.trace) EXPECT_TRUE(std::isfinite(e.loss.total));
}

TEST(Fit, DeterministicForFixedSeed) {
  const SynthScene s = small_scene(9);
  FitConfig cfg;
  cfg.with_ss = true;
  cfg.iterations = 60;
  cfg.seed = 4;
  const FitResult a = fit_scene(s.annotation, cfg), b = fit_scene(s.annotation, cfg);
  ASSERT_EQ(a.rboxes.size(), b.rboxes.size());
  for (std::size_t i = 0; i < a.rboxes.size(); ++i) {
    EXPECT_EQ(a.rboxes[i].cx, b.rboxes[i].cx);
    EXPECT_EQ(a.rboxes[i].w, b.rboxes[i].w);
    EXPECT_EQ(a.rboxes[i].theta, b.rboxes[i].theta);
  }
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].loss.total, b.trace[i].loss.total);
}

TEST(Fit, FixedCentersStayOnPoints) {
  SynthConfig sc;
  sc.width = sc.height = 192;
  sc.min_count = sc.max_count = 10;
  sc.point_jitter = 0.2;
  sc.seed = 10;
  const SynthScene s = synth_scene(sc);
  FitConfig cfg;
  cfg.refine_centers = false;
  cfg.iterations = 50;
  const FitResult r = fit_scene(s.annotation, cfg);
  for (std::size_t i = 0; i < r.rboxes.size(); ++i) EXPECT_EQ(r.rboxes[i].center(), s.annotation.instances[i].point);
}

TEST(Fit, FinalTotalNotAboveInitial) {
  for (std::uint64_t seed : {11, 12}) {
    const SynthScene s = small_scene(seed);
    FitConfig cfg;
    cfg.with_ss = seed % 2 == 0;
    const FitResult r = fit_scene(s.annotation, cfg);
    FitConfig plain = cfg;
    plain.with_ss = false;
    const auto cache = build_scene_cache(s.annotation, plain);
    EXPECT_LE(total_layout_loss(r.rboxes, s.annotation, cache, plain).total,
              total_layout_loss(init_params(s.annotation, plain), s.annotation, cache, plain).total);
  }
}

TEST(Fit, ShrinkFromAbove) {
  for (std::uint64_t seed : {13, 14}) {
    const SynthScene s = small_scene(seed);
    FitConfig cfg;
    cfg.iterations = 20;
    auto init = s.gt_boxes;
    for (auto& b : init) {
      b.w *= 2;
      b.h *= 2;
    }
    const FitResult r = fit_scene_from(s.annotation, cfg, init);
    auto ow = [](const LossBreakdown& l) { return l.overlap + l.watershed; };
    for (std::size_t k = 1; k < r.trace.size(); ++k)
      EXPECT_LT(ow(r.trace[k].loss), ow(r.trace[k - 1].loss)) << "seed " << seed << " iteration " << k;
  }
}

TEST(Fit, NonFiniteDiagnosis) {
  LossBreakdown l;
  l.watershed = std::nan("");
  try {
    detail::check_finite(l, 17);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFinite);
    const std::string what = e.what();
    EXPECT_NE(what.find("17"), std::string::npos);
    EXPECT_NE(what.find("watershed"), std::string::npos);
  }
}

TEST(Fit, ConfigValidation) {
  FitConfig cfg;
  cfg.step = 0.0;
  EXPECT_THROW(validate(cfg), Error);
  cfg = FitConfig{};
  cfg.proportions = {0.5, 0.1, 0.1};
  EXPECT_THROW(validate(cfg), Error);
  EXPECT_THROW(fit_scene(SceneAnnotation{Image(8, 8), {}}, FitConfig{}), Error);
}
