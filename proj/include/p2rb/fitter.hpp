// SPDX-License-Identifier: Apache-2.0
//
// Network-free layout fitter: optimizes per-instance (log w, log h, theta)
// and, optionally, the center, minimizing the weighted sum of the overlap,
// watershed, edge and (optionally) consistency losses.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "p2rb/consistency.hpp"
#include "p2rb/edge.hpp"
#include "p2rb/error.hpp"
#include "p2rb/gaussian.hpp"
#include "p2rb/geometry.hpp"
#include "p2rb/scene.hpp"
#include "p2rb/tessellation.hpp"
#include "p2rb/watershed.hpp"

namespace p2rb {

struct LossWeights {
  double overlap = 10.0;
  double watershed = 5.0;
  double edge = 0.3;
  double ss = 1.0;
};

enum class GradientMode { FiniteDifference, Analytic };

struct FitConfig {
  LossWeights weights;
  /// Weight of the basin-tightness term (log area of the basin's bounding
  /// box in the frame of the predicted box), relative to weights.watershed.
  double tightness_ratio = 2.0;
  int iterations = 300;
  /// Adam learning rate, in log-size units and radians.
  double step = 0.03;
  /// Let centers move away from the annotated points.
  bool refine_centers = true;
  /// Adam learning rate for centers, in px.
  double center_step = 0.2;
  EdgeParams edge;
  double init_min = 8.0;
  double init_max = 64.0;
  double init_single = 32.0;
  GradientMode gradient = GradientMode::Analytic;
  /// Central-difference step relative to the parameter scale.
  double fd_step = 1e-3;
  std::uint64_t seed = 0;
  bool with_ss = false;
  ViewProportions proportions;
  GwdForm gwd = GwdForm::Log1p;
  SurfaceMode surface = SurfaceMode::GradientMagnitude;
  BarrierMode barriers = BarrierMode::BackgroundSeeds;
};

inline void validate(const FitConfig& c) {
  const auto& w = c.weights;
  const bool ok = w.overlap >= 0.0 && w.watershed >= 0.0 && w.edge >= 0.0 && w.ss >= 0.0 &&
                  c.tightness_ratio >= 0.0 && c.iterations >= 0 && c.step > 0.0 && c.edge.K >= 1 &&
                  c.edge.beta > 0.0 && c.edge.sigma_e > 0.0 && c.init_min > 0.0 && c.init_max >= c.init_min &&
                  c.init_single > 0.0 && c.fd_step > 0.0 && c.center_step > 0.0;
  if (!ok) throw Error(ErrorKind::Config, "fit: invalid configuration");
  validate(c.proportions);
}

inline double tightness_weight(const FitConfig& c) { return c.weights.watershed * c.tightness_ratio; }

/// Per-scene precomputation: everything that depends only on the points and
/// the image.
struct SceneCache {
  int width = 0;
  int height = 0;
  std::size_t instance_count = 0;
  std::uint64_t fingerprint = 0;
  VoronoiResult voronoi;
  TerrainSurface surface;
  /// False when the surface carries no relief (for example a flat image).
  bool surface_evidence = false;
  BasinLabelMap basins;
  /// Basin pixels per instance (merged instances share their cell's basin).
  std::vector<std::vector<Point2>> instance_basins;
  EdgeMap edges;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t scene_fingerprint(const SceneAnnotation& scene) {
  std::uint64_t h = 1469598103934665603ull;
  const int dims[2] = {scene.image.width(), scene.image.height()};
  h = fnv1a(h, dims, sizeof(dims));
  for (const auto& inst : scene.instances) {
    h = fnv1a(h, &inst.point.x, sizeof(double));
    h = fnv1a(h, &inst.point.y, sizeof(double));
  }
  return fnv1a(h, scene.image.data().data(), scene.image.size() * sizeof(double));
}

}  // namespace detail

inline SceneCache build_scene_cache(const SceneAnnotation& scene, const FitConfig& cfg,
                                    const EdgeMap* external_edges = nullptr) {
  validate(scene);
  SceneCache cache;
  cache.width = scene.image.width();
  cache.height = scene.image.height();
  cache.instance_count = scene.instances.size();
  cache.fingerprint = detail::scene_fingerprint(scene);
  const auto points = scene.points();
  cache.voronoi = voronoi_partition(points, cache.width, cache.height);
  cache.warnings = cache.voronoi.warnings;

  // One marker per Voronoi cell.
  std::vector<Point2> markers;
  std::vector<int> marker_of_cell(points.size(), -1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (cache.voronoi.representative[i] == static_cast<int>(i)) {
      marker_of_cell[i] = static_cast<int>(markers.size());
      markers.push_back(points[i]);
    }
  }
  cache.surface = make_surface(scene.image, cfg.surface);
  const auto [lo, hi] = std::minmax_element(cache.surface.data().begin(), cache.surface.data().end());
  cache.surface_evidence = (*hi - *lo) > 1e-9;
  if (!cache.surface_evidence) cache.warnings.push_back("flat surface: no watershed evidence");
  cache.basins = watershed(cache.surface, markers, cache.voronoi.ridges, cfg.barriers);
  const auto per_marker = basin_pixels(cache.basins, markers.size());
  cache.instance_basins.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    cache.instance_basins[i] = per_marker[static_cast<std::size_t>(marker_of_cell[static_cast<std::size_t>(cache.voronoi.representative[i])])];

  if (external_edges) {
    if (external_edges->width() != cache.width || external_edges->height() != cache.height)
      throw Error(ErrorKind::Config, "fit: external edge map size differs from the image");
    cache.edges = *external_edges;
    for (double& v : cache.edges.data()) v = std::clamp(v, 0.0, 1.0);
  } else {
    cache.edges = sobel_edge_map(scene.image);
  }
  return cache;
}

inline void check_cache(const SceneAnnotation& scene, const SceneCache& cache) {
  if (cache.width != scene.image.width() || cache.height != scene.image.height() ||
      cache.instance_count != scene.instances.size() || cache.fingerprint != detail::scene_fingerprint(scene))
    throw Error(ErrorKind::StaleCache, "scene cache was built for a different scene");
}

/// Initial sizes from the nearest-neighbor spacing, theta = 0.
inline std::vector<RBox> init_params(const SceneAnnotation& scene, const FitConfig& cfg) {
  std::vector<RBox> boxes;
  const auto& inst = scene.instances;
  boxes.reserve(inst.size());
  for (std::size_t i = 0; i < inst.size(); ++i) {
    double size = cfg.init_single;
    if (inst.size() > 1) {
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < inst.size(); ++j)
        if (j != i) nearest = std::min(nearest, norm(inst[j].point - inst[i].point));
      size = std::clamp(0.5 * nearest, cfg.init_min, cfg.init_max);
    }
    boxes.push_back({inst[i].point.x, inst[i].point.y, size, size, 0.0});
  }
  return boxes;
}

struct LossBreakdown {
  double total = 0.0;
  double overlap = 0.0;
  double watershed = 0.0;
  double edge = 0.0;
  double ss = 0.0;
  double tightness = 0.0;
};

/// Detached per-instance regression targets.
struct InstanceTargets {
  WidthHeightTarget watershed;
  bool watershed_evidence = true;
  EdgeTarget edge;
};

inline std::vector<InstanceTargets> compute_targets(std::span<const RBox> boxes, const SceneCache& cache,
                                                    const FitConfig& cfg) {
  const auto lambda = soft_prior(cfg.edge.K, cfg.edge.beta, cfg.edge.sigma_e);
  std::vector<InstanceTargets> out(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const RBox& b = boxes[i];
    auto& t = out[i];
    t.watershed_evidence = cache.surface_evidence && !cache.instance_basins[i].empty();
    t.watershed = t.watershed_evidence ? watershed_wh_target(cache.instance_basins[i], b)
                                       : WidthHeightTarget{b.w, b.h, true};
    t.edge = edge_wh_target_from_patch(rotated_roi_align(cache.edges, b, cfg.edge.K, cfg.edge.beta), b,
                                       cfg.edge.beta, lambda);
  }
  return out;
}

/// Consistency reference: the augmented-view predictions and the transform
/// relating them to the current parameter set.
struct SsReference {
  ViewTransform transform;
  std::vector<ViewInstance> aug;
};

namespace detail {

inline double ss_term(const RBox& b, const ViewInstance& aug, const ViewTransform& t, GwdForm form) {
  const Gaussian2D mapped{{}, congruence(t.alpha, rbox_to_gaussian(b).sigma)};
  return gwd_loss(mapped, {{}, aug.g.sigma}, form) + angle_loss(t.map_angle(b.theta), aug.theta);
}

/// log of the area of the basin's bounding box in the frame of `b`.
inline double basin_tightness(std::span<const Point2> basin, const RBox& b) {
  const WidthHeightTarget t = watershed_wh_target(basin, b);
  return std::log(t.w * t.h);
}

inline constexpr double kTightnessStep = 0.01;
inline constexpr double kTightnessCenterStep = 0.5;

}  // namespace detail

/// Loss terms at fixed (detached) targets.
inline LossBreakdown evaluate_terms(std::span<const RBox> boxes, std::span<const InstanceTargets> targets,
                                    const SceneCache& cache, const FitConfig& cfg,
                                    const SsReference* ss = nullptr) {
  LossBreakdown out;
  const std::size_t n = boxes.size();
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<Gaussian2D> gs;
  gs.reserve(n);
  for (const RBox& b : boxes) gs.push_back(rbox_to_gaussian(b));
  out.overlap = gaussian_overlap_loss(gs);
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i].watershed_evidence) out.watershed += inv_n * voronoi_watershed_loss(boxes[i], targets[i].watershed, cfg.gwd);
    out.edge += inv_n * edge_loss(boxes[i], targets[i].edge.wh);
    if (ss) out.ss += inv_n * detail::ss_term(boxes[i], ss->aug[i], ss->transform, cfg.gwd);
    if (tightness_weight(cfg) > 0.0 && targets[i].watershed_evidence)
      out.tightness += inv_n * detail::basin_tightness(cache.instance_basins[i], boxes[i]);
  }
  const auto& w = cfg.weights;
  out.total = w.overlap * out.overlap + w.watershed * out.watershed + w.edge * out.edge +
              (ss ? w.ss * out.ss : 0.0) + tightness_weight(cfg) * out.tightness;
  return out;
}

/// Weighted total of the layout losses for the given boxes. Targets are
/// recomputed from the boxes and treated as constants.
inline LossBreakdown total_layout_loss(std::span<const RBox> boxes, const SceneAnnotation& scene,
                                       const SceneCache& cache, const FitConfig& cfg,
                                       const SsReference* ss = nullptr) {
  check_cache(scene, cache);
  if (boxes.size() != scene.instances.size())
    throw Error(ErrorKind::Alignment, "boxes are not aligned with the scene instances");
  const auto targets = compute_targets(boxes, cache, cfg);
  return evaluate_terms(boxes, targets, cache, cfg, ss);
}

/// Box parameters in optimizer space.
struct BoxParams {
  double logw = 0.0;
  double logh = 0.0;
  double theta = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  static BoxParams from_box(const RBox& b) { return {std::log(b.w), std::log(b.h), b.theta, b.cx, b.cy}; }
  RBox to_box() const { return {cx, cy, std::exp(logw), std::exp(logh), theta}; }
};

namespace detail {

/// Every term of the total that depends on instance i, with i's box replaced by `bi`.
inline double instance_objective(std::size_t i, const RBox& bi, std::span<const RBox> boxes,
                                 std::span<const InstanceTargets> targets, const SceneCache& cache,
                                 const FitConfig& cfg, const SsReference* ss) {
  const std::size_t n = boxes.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto& w = cfg.weights;
  double v = 0.0;
  if (w.overlap > 0.0 && n > 1) {
    const Gaussian2D gi = rbox_to_gaussian(bi);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) s += bhattacharyya_coefficient(gi, rbox_to_gaussian(boxes[j]));
    v += w.overlap * 2.0 * inv_n * s;
  }
  if (targets[i].watershed_evidence) v += w.watershed * inv_n * voronoi_watershed_loss(bi, targets[i].watershed, cfg.gwd);
  v += w.edge * inv_n * edge_loss(bi, targets[i].edge.wh);
  if (ss) v += w.ss * inv_n * ss_term(bi, ss->aug[i], ss->transform, cfg.gwd);
  if (tightness_weight(cfg) > 0.0 && targets[i].watershed_evidence)
    v += tightness_weight(cfg) * inv_n * basin_tightness(cache.instance_basins[i], bi);
  return v;
}

inline double central_difference(const auto& f, double x, double h) { return (f(x + h) - f(x - h)) / (2.0 * h); }

}  // namespace detail

/// Gradient of the total with respect to every instance's (log w, log h,
/// theta, cx, cy).
inline std::vector<BoxGrad> layout_gradient(std::span<const RBox> boxes, std::span<const InstanceTargets> targets,
                                            const SceneCache& cache, const FitConfig& cfg,
                                            const SsReference* ss = nullptr) {
  const std::size_t n = boxes.size();
  std::vector<BoxGrad> grads(n);
  if (n == 0) return grads;
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto& w = cfg.weights;
  const double h = cfg.fd_step;

  if (cfg.gradient == GradientMode::FiniteDifference) {
    for (std::size_t i = 0; i < n; ++i) {
      const BoxParams p = BoxParams::from_box(boxes[i]);
      auto obj = [&](BoxParams q) { return detail::instance_objective(i, q.to_box(), boxes, targets, cache, cfg, ss); };
      grads[i].d_logw = detail::central_difference([&](double x) { auto q = p; q.logw = x; return obj(q); }, p.logw, h);
      grads[i].d_logh = detail::central_difference([&](double x) { auto q = p; q.logh = x; return obj(q); }, p.logh, h);
      // The tightness term is a maximum over pixels; a wider angle step keeps its difference quotient stable.
      const double ht = tightness_weight(cfg) > 0.0 ? std::max(h, detail::kTightnessStep) : h;
      grads[i].d_theta = detail::central_difference([&](double x) { auto q = p; q.theta = x; return obj(q); }, p.theta, ht);
      const double hc = std::max(h, detail::kTightnessCenterStep);
      grads[i].d_cx = detail::central_difference([&](double x) { auto q = p; q.cx = x; return obj(q); }, p.cx, hc);
      grads[i].d_cy = detail::central_difference([&](double x) { auto q = p; q.cy = x; return obj(q); }, p.cy, hc);
    }
    return grads;
  }

  if (w.overlap > 0.0) {
    const auto o = gaussian_overlap_loss_with_grad(boxes);
    for (std::size_t i = 0; i < n; ++i) grads[i] += w.overlap * o.grads[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const RBox& b = boxes[i];
    if (targets[i].watershed_evidence)
      grads[i] += (w.watershed * inv_n) * voronoi_watershed_loss_grad(b, targets[i].watershed, cfg.gwd);
    grads[i] += (w.edge * inv_n) * edge_loss_grad(b, targets[i].edge.wh);
    const BoxParams p = BoxParams::from_box(b);
    if (ss) {
      auto f = [&](BoxParams q) { return detail::ss_term(q.to_box(), ss->aug[i], ss->transform, cfg.gwd); };
      BoxGrad g;
      g.d_logw = detail::central_difference([&](double x) { auto q = p; q.logw = x; return f(q); }, p.logw, h);
      g.d_logh = detail::central_difference([&](double x) { auto q = p; q.logh = x; return f(q); }, p.logh, h);
      g.d_theta = detail::central_difference([&](double x) { auto q = p; q.theta = x; return f(q); }, p.theta, h);
      grads[i] += (w.ss * inv_n) * g;
    }
    if (tightness_weight(cfg) > 0.0 && targets[i].watershed_evidence) {
      const auto& basin = cache.instance_basins[i];
      auto f = [&](double t) { RBox q = b; q.theta = t; return detail::basin_tightness(basin, q); };
      const double k = tightness_weight(cfg) * inv_n;
      grads[i].d_theta += k * detail::central_difference(f, b.theta, detail::kTightnessStep);
      auto fx = [&](double x) { RBox q = b; q.cx = x; return detail::basin_tightness(basin, q); };
      auto fy = [&](double y) { RBox q = b; q.cy = y; return detail::basin_tightness(basin, q); };
      grads[i].d_cx += k * detail::central_difference(fx, b.cx, detail::kTightnessCenterStep);
      grads[i].d_cy += k * detail::central_difference(fy, b.cy, detail::kTightnessCenterStep);
    }
  }
  return grads;
}

struct TraceEntry {
  int iteration = 0;
  LossBreakdown loss;
};

struct FitResult {
  std::vector<RBox> rboxes;
  std::vector<TraceEntry> trace;
  std::vector<std::string> warnings;
};

namespace detail {

inline void check_finite(const LossBreakdown& l, int iteration) {
  const std::array<std::pair<const char*, double>, 6> terms{{{"total", l.total},
                                                             {"overlap", l.overlap},
                                                             {"watershed", l.watershed},
                                                             {"edge", l.edge},
                                                             {"ss", l.ss},
                                                             {"tightness", l.tightness}}};
  std::string bad;
  for (const auto& [name, v] : terms)
    if (!std::isfinite(v)) bad += std::string(bad.empty() ? "" : ", ") + name;
  if (!bad.empty())
    throw Error(ErrorKind::NonFinite, "fit aborted at iteration " + std::to_string(iteration) + ": non-finite " + bad);
}

/// Consistency reference for one iteration: the transform of the current
/// parameters, jittered, acting as the second view.
template <class Rng>
SsReference make_ss_reference(std::span<const RBox> boxes, const FitConfig& cfg, Rng& rng) {
  SsReference ref;
  ref.transform = sample_transform(rng, cfg.proportions);
  std::normal_distribution<double> jitter(0.0, 0.02);
  ref.aug.reserve(boxes.size());
  for (const RBox& b : boxes) {
    RBox j = b;
    j.w *= std::exp(jitter(rng));
    j.h *= std::exp(jitter(rng));
    j.theta += jitter(rng);
    const ViewInstance v = view_instance(j);
    ref.aug.push_back({transform_gaussian(ref.transform, v.g), ref.transform.map_angle(v.theta)});
  }
  return ref;
}

}  // namespace detail

/// Adam descent (beta1 0.9, beta2 0.999) on (log w, log h, theta) and,
/// with refine_centers, on the center. Targets are refreshed from the
/// current boxes at every iteration.
/// If the last iterate ends above the starting total, the lowest-total
/// iterate is returned instead and a warning is recorded.
inline FitResult fit_scene_from(const SceneAnnotation& scene, const FitConfig& cfg, std::vector<RBox> boxes,
                                const EdgeMap* external_edges = nullptr) {
  validate(cfg);
  const SceneCache cache = build_scene_cache(scene, cfg, external_edges);
  if (boxes.size() != scene.instances.size())
    throw Error(ErrorKind::Alignment, "initial boxes are not aligned with the scene instances");
  for (const RBox& b : boxes)
    if (!is_valid(b)) throw Error(ErrorKind::DegenerateGeometry, "initial box has non-positive size");
  FitResult result;
  result.warnings = cache.warnings;
  const std::size_t n = boxes.size();
  std::vector<RBox> best;
  double best_total = std::numeric_limits<double>::infinity();
  std::vector<BoxParams> params(n);
  for (std::size_t i = 0; i < n; ++i) params[i] = BoxParams::from_box(boxes[i]);

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  std::vector<std::array<double, 5>> m(n, std::array<double, 5>{});
  std::vector<std::array<double, 5>> v(n, std::array<double, 5>{});
  const int dims = cfg.refine_centers ? 5 : 3;
  const double rates[5] = {cfg.step, cfg.step, cfg.step, cfg.center_step, cfg.center_step};
  std::mt19937_64 rng(cfg.seed);
  double b1t = 1.0;
  double b2t = 1.0;

  auto refresh = [&] {
    for (std::size_t i = 0; i < n; ++i) boxes[i] = params[i].to_box();
  };

  for (int it = 0; it <= cfg.iterations; ++it) {
    refresh();
    const auto targets = compute_targets(boxes, cache, cfg);
    SsReference ss_ref;
    if (cfg.with_ss) ss_ref = detail::make_ss_reference(boxes, cfg, rng);
    const SsReference* ss = cfg.with_ss ? &ss_ref : nullptr;
    const LossBreakdown loss = evaluate_terms(boxes, targets, cache, cfg, ss);
    detail::check_finite(loss, it);
    result.trace.push_back({it, loss});
    if (loss.total < best_total) {
      best_total = loss.total;
      best = boxes;
    }
    if (it == 0 || it == cfg.iterations) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!targets[i].edge.width_evidence || !targets[i].edge.height_evidence)
          result.warnings.push_back("iteration " + std::to_string(it) + ": instance " + std::to_string(i) +
                                    " has no edge evidence");
        if (targets[i].watershed.fallback && cache.surface_evidence)
          result.warnings.push_back("iteration " + std::to_string(it) + ": instance " + std::to_string(i) +
                                    " has an empty basin");
      }
    }
    if (it == cfg.iterations) break;

    const auto grads = layout_gradient(boxes, targets, cache, cfg, ss);
    b1t *= kBeta1;
    b2t *= kBeta2;
    for (std::size_t i = 0; i < n; ++i) {
      const std::array<double, 5> g{grads[i].d_logw, grads[i].d_logh, grads[i].d_theta, grads[i].d_cx, grads[i].d_cy};
      double* p[5] = {&params[i].logw, &params[i].logh, &params[i].theta, &params[i].cx, &params[i].cy};
      for (int k = 0; k < dims; ++k) {
        if (!std::isfinite(g[k]))
          throw Error(ErrorKind::NonFinite, "fit aborted at iteration " + std::to_string(it) +
                                                ": non-finite gradient for instance " + std::to_string(i));
        m[i][k] = kBeta1 * m[i][k] + (1.0 - kBeta1) * g[k];
        v[i][k] = kBeta2 * v[i][k] + (1.0 - kBeta2) * g[k] * g[k];
        const double mh = m[i][k] / (1.0 - b1t);
        const double vh = v[i][k] / (1.0 - b2t);
        *p[k] -= rates[k] * mh / (std::sqrt(vh) + kEps);
      }
    }
  }
  if (!result.trace.empty() && result.trace.back().loss.total > result.trace.front().loss.total) {
    result.warnings.push_back("final total above initial total; returning the lowest-total iterate");
    boxes = best;
  }
  result.rboxes.reserve(n);
  for (const RBox& b : boxes) result.rboxes.push_back(canonicalize(b));
  return result;
}

inline FitResult fit_scene(const SceneAnnotation& scene, const FitConfig& cfg, const EdgeMap* external_edges = nullptr) {
  validate(scene);
  return fit_scene_from(scene, cfg, init_params(scene, cfg), external_edges);
}

}  // namespace p2rb
