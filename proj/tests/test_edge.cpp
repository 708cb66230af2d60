// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "p2rb/edge.hpp"

using namespace p2rb;

namespace {

RoiPatch random_patch(std::mt19937_64& rng, int K) {
  std::uniform_real_distribution<double> u(0, 1);
  RoiPatch p{K, std::vector<double>(static_cast<std::size_t>((2 * K + 1) * (2 * K + 1)))};
  for (double& v : p.values) v = u(rng);
  return p;
}

/// Patch with edge responses only on the rows/columns at offsets +-i.
RoiPatch peak_patch(int K, int iw, int ih) {
  RoiPatch p{K, std::vector<double>(static_cast<std::size_t>((2 * K + 1) * (2 * K + 1)), 0.0)};
  for (int j = 0; j <= 2 * K; ++j) {
    p(K - ih, j) = p(K + ih, j) = 1.0;
    p(j, K - iw) = p(j, K + iw) = 1.0;
  }
  return p;
}

}  // namespace

TEST(Fold, MatchesBruteForce) {
  std::mt19937_64 rng(31);
  for (int K : {1, 3, 8, 24}) {
    const RoiPatch p = random_patch(rng, K);
    const auto bh = oracle::fold_brute(p, true);
    const auto bw = oracle::fold_brute(p, false);
    const auto gh = fold_profile(p, FoldAxis::Height);
    const auto gw = fold_profile(p, FoldAxis::Width);
    ASSERT_EQ(gh.size(), static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) {
      EXPECT_NEAR(gh[static_cast<std::size_t>(i)], bh[static_cast<std::size_t>(i)], 1e-12);
      EXPECT_NEAR(gw[static_cast<std::size_t>(i)], bw[static_cast<std::size_t>(i)], 1e-12);
    }
  }
}

TEST(Fold, CenterLineExcluded) {
  RoiPatch p{2, std::vector<double>(25, 0.0)};
  for (int j = 0; j < 5; ++j) p(2, j) = 5.0;
  for (double v : fold_profile(p, FoldAxis::Height)) EXPECT_EQ(v, 0.0);
}

TEST(SoftPrior, PeaksAtCurrentSide) {
  const auto l = soft_prior(24, 1.6, 6.0);
  EXPECT_DOUBLE_EQ(l[14], 1.0);  // i = 15 = K / beta
  EXPECT_LT(l[0], l[14]);
  EXPECT_LT(l[23], l[14]);
  EXPECT_THROW(soft_prior(0, 1.6, 6.0), Error);
}

TEST(EdgeTarget, IdentityAtPriorPeak) {
  const EdgeParams ep;
  const auto lambda = soft_prior(ep.K, ep.beta, ep.sigma_e);
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> s(4, 60);
  for (int k = 0; k < 50; ++k) {
    const RBox b{0, 0, s(rng), s(rng), 0.1};
    const auto t = edge_wh_target_from_patch(peak_patch(ep.K, 15, 15), b, ep.beta, lambda);
    EXPECT_NEAR(t.wh.w, b.w, 1e-9);
    EXPECT_NEAR(t.wh.h, b.h, 1e-9);
    EXPECT_FALSE(t.wh.fallback);
  }
}

TEST(EdgeTarget, ScalesWithPeakIndex) {
  const EdgeParams ep;
  const auto lambda = soft_prior(ep.K, ep.beta, ep.sigma_e);
  const RBox b{0, 0, 30, 12, 0};
  const auto t = edge_wh_target_from_patch(peak_patch(ep.K, 18, 12), b, ep.beta, lambda);
  EXPECT_NEAR(t.wh.w, ep.beta * 30 / ep.K * 18, 1e-9);
  EXPECT_NEAR(t.wh.h, ep.beta * 12 / ep.K * 12, 1e-9);
}

TEST(EdgeTarget, NoEvidenceKeepsCurrentSize) {
  const EdgeMap empty(64, 64, 0.0);
  const RBox b{32, 32, 20, 10, 0.4};
  const auto t = edge_wh_target(empty, b);
  EXPECT_FALSE(t.width_evidence);
  EXPECT_FALSE(t.height_evidence);
  EXPECT_TRUE(t.wh.fallback);
  EXPECT_EQ(t.wh.w, b.w);
  EXPECT_EQ(t.wh.h, b.h);
  EXPECT_EQ(edge_loss(b, t.wh), 0.0);
}

TEST(EdgeTarget, RecoversRenderedRectangle) {
  // Sharp rectangle edges on a pixel grid: the target lands near the true size
  // for a box that starts 20% too large.
  Image img(96, 96, 0.1);
  for (int y = 38; y <= 57; ++y)
    for (int x = 28; x <= 67; ++x) img(x, y) = 0.9;
  const EdgeMap e = sobel_edge_map(img);
  const RBox start{47.5, 47.5, 48, 24, 0};
  const auto t = edge_wh_target(e, start);
  EXPECT_NEAR(t.wh.w, 40, 3.0);
  EXPECT_NEAR(t.wh.h, 20, 2.0);
}

TEST(Sobel, NormalizedRange) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(0, 1);
  Image img(30, 20);
  for (double& v : img.data()) v = u(rng);
  const EdgeMap e = sobel_edge_map(img);
  for (double v : e.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  const EdgeMap flat = sobel_edge_map(Image(10, 10, 0.5));
  for (double v : flat.data()) EXPECT_EQ(v, 0.0);
}

TEST(RoiAlign, CenterSampleAndOutsideZero) {
  EdgeMap m(21, 21, 0.0);
  m(10, 10) = 1.0;
  const RoiPatch p = rotated_roi_align(m, {10, 10, 8, 4, 0.7}, 4, 1.6);
  EXPECT_DOUBLE_EQ(p(4, 4), 1.0);
  const RoiPatch far = rotated_roi_align(m, {500, 500, 8, 4, 0.0}, 4, 1.6);
  for (double v : far.values) EXPECT_EQ(v, 0.0);
}

TEST(RoiAlign, BilinearMatchesHandComputation) {
  EdgeMap m(4, 4, 0.0);
  m(1, 1) = 1.0;
  m(2, 1) = 0.5;
  EXPECT_NEAR(sample_bilinear(m, 1.5, 1.0), 0.75, 1e-12);
  EXPECT_NEAR(sample_bilinear(m, 1.0, 1.5), 0.5, 1e-12);
  EXPECT_EQ(sample_bilinear(m, -3, 0), 0.0);
}

TEST(SmoothL1, ValuesAndSlopes) {
  EXPECT_DOUBLE_EQ(smooth_l1(0.5), 0.125);
  EXPECT_DOUBLE_EQ(smooth_l1(-3.0), 2.5);
  EXPECT_DOUBLE_EQ(smooth_l1_slope(0.5), 0.5);
  EXPECT_DOUBLE_EQ(smooth_l1_slope(-3.0), -1.0);
}
