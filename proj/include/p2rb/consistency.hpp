// SPDX-License-Identifier: Apache-2.0
//
// View transforms and the symmetry-aware consistency loss between a set of
// predictions and the predictions for a transformed view.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "p2rb/edge.hpp"
#include "p2rb/error.hpp"
#include "p2rb/gaussian.hpp"
#include "p2rb/geometry.hpp"

namespace p2rb {

enum class TransformKind { Rotation, Flip, Scale };

struct ViewTransform {
  TransformKind kind = TransformKind::Rotation;
  double rotation = 0.0;  // R, rotation only
  double scale = 1.0;     // s, scale only
  Mat2 alpha{};
  int m = 1;

  static ViewTransform rotate(double r) { return {TransformKind::Rotation, r, 1.0, rotation_matrix(r), 1}; }
  static ViewTransform flip() { return {TransformKind::Flip, 0.0, 1.0, Mat2::diag(1.0, -1.0), -1}; }
  static ViewTransform rescale(double s) { return {TransformKind::Scale, 0.0, s, Mat2::diag(s, s), 1}; }

  /// Angle the transformed view should predict for an instance at theta.
  double map_angle(double theta) const { return m * theta + rotation; }
};

/// Probabilities of drawing a rotation, flip or scale view.
struct ViewProportions {
  double rotation = 0.68;
  double flip = 0.07;
  double scale = 0.25;
};

inline void validate(const ViewProportions& p) {
  const bool nonneg = p.rotation >= 0.0 && p.flip >= 0.0 && p.scale >= 0.0;
  if (!nonneg || std::abs(p.rotation + p.flip + p.scale - 1.0) > 1e-9)
    throw Error(ErrorKind::Config, "view proportions must be nonnegative and sum to 1");
}

/// Rotation amounts are uniform in [0, 2pi), scales uniform in (0.5, 0.9).
template <class Rng>
ViewTransform sample_transform(Rng& rng, const ViewProportions& p = {}) {
  validate(p);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  if (u < p.rotation) return ViewTransform::rotate(2.0 * kPi * unit(rng));
  if (u < p.rotation + p.flip) return ViewTransform::flip();
  double s = 0.5 + 0.4 * unit(rng);
  if (s <= 0.5) s = std::nextafter(0.5, 1.0);
  return ViewTransform::rescale(s);
}

inline ViewTransform sample_transform(std::uint64_t seed, const ViewProportions& p = {}) {
  std::mt19937_64 rng(seed);
  return sample_transform(rng, p);
}

/// Covariance alpha Sigma alpha^T; the mean is mapped by alpha as well.
inline Gaussian2D transform_gaussian(const ViewTransform& t, const Gaussian2D& g) {
  return {t.alpha * g.mu, congruence(t.alpha, g.sigma)};
}

/// Smooth-L1 of the angle difference reduced modulo pi, i.e. the minimum
/// over k of smooth-L1(theta1 - (k pi + theta2)).
inline double angle_loss(double theta1, double theta2) {
  return smooth_l1(angle_diff_mod_pi(theta1, theta2));
}

/// d angle_loss / d theta1.
inline double angle_loss_slope(double theta1, double theta2) {
  return smooth_l1_slope(angle_diff_mod_pi(theta1, theta2));
}

struct ViewInstance {
  Gaussian2D g;
  double theta = 0.0;
};

/// Index-aligned predictions for the original and the augmented view.
struct AugmentedPair {
  std::vector<ViewInstance> base;
  std::vector<ViewInstance> aug;
};

inline ViewInstance view_instance(const RBox& b) { return {rbox_to_gaussian(b), b.theta}; }

/// Mean over instances of GWD(alpha Sigma alpha^T, Sigma_aug) plus the
/// angle loss between m theta + R and theta_aug. Means are not compared.
inline double consistency_loss(const AugmentedPair& pair, const ViewTransform& t, GwdForm form = GwdForm::Log1p) {
  if (pair.base.size() != pair.aug.size())
    throw Error(ErrorKind::Alignment, "consistency: base and augmented sets differ in length");
  if (pair.base.empty()) throw Error(ErrorKind::Alignment, "consistency: empty instance set");
  double sum = 0.0;
  for (std::size_t i = 0; i < pair.base.size(); ++i) {
    const Gaussian2D mapped{{}, congruence(t.alpha, pair.base[i].g.sigma)};
    const Gaussian2D aug{{}, pair.aug[i].g.sigma};
    sum += gwd_loss(mapped, aug, form) + angle_loss(t.map_angle(pair.base[i].theta), pair.aug[i].theta);
  }
  return sum / static_cast<double>(pair.base.size());
}

}  // namespace p2rb
