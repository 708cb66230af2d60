// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synth, voronoi, watershed, fit, loss, eval.
// Exit codes: 0 success, 1 usage error, 2 data error.
#pragma once

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "p2rb/eval.hpp"
#include "p2rb/fitter.hpp"
#include "p2rb/io/config.hpp"
#include "p2rb/io/dota.hpp"
#include "p2rb/io/image.hpp"
#include "p2rb/io/points.hpp"
#include "p2rb/io/report.hpp"
#include "p2rb/io/svg.hpp"
#include "p2rb/io/trace.hpp"
#include "p2rb/synth.hpp"
#include "p2rb/tessellation.hpp"
#include "p2rb/watershed.hpp"

namespace p2rb {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace cli {

struct Scene {
  SceneAnnotation annotation;
  io::CategoryTable categories;
};

inline Scene load_scene(const std::string& image_path, const std::string& points_path) {
  Scene s;
  s.annotation = io::make_scene(io::read_image(image_path), io::parse_points(io::read_file(points_path)), s.categories);
  validate(s.annotation);
  return s;
}

inline std::vector<LabeledBox> load_labeled(const std::string& path, std::ostream& err) {
  const auto parsed = io::parse_dota(io::read_file(path));
  for (const auto& w : parsed.warnings) err << "warning: " << path << ": " << w << "\n";
  std::vector<LabeledBox> out;
  for (const auto& r : parsed.records) out.push_back({r.box, r.category});
  return out;
}

inline void warn_all(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

struct FitJob {
  std::string image;
  std::string points;
  std::string out_dota;
  std::string out_svg;
  std::string out_trace;
  std::string edge_map;
};

/// Runs one scene; returns the warnings to report.
inline std::vector<std::string> run_fit_job(const FitJob& job, const FitConfig& cfg) {
  const Scene scene = load_scene(job.image, job.points);
  std::optional<EdgeMap> edges;
  if (!job.edge_map.empty()) edges = io::read_image(job.edge_map);
  const FitResult r = fit_scene(scene.annotation, cfg, edges ? &*edges : nullptr);
  std::vector<io::DotaRecord> recs;
  for (std::size_t i = 0; i < r.rboxes.size(); ++i)
    recs.push_back({r.rboxes[i], scene.categories.name(scene.annotation.instances[i].class_id), 0});
  io::write_file(job.out_dota, io::emit_dota(recs));
  if (!job.out_svg.empty()) {
    io::SvgLayers layers;
    layers.predictions = r.rboxes;
    layers.points = scene.annotation.points();
    io::write_file(job.out_svg,
                   io::render_svg(scene.annotation.image.width(), scene.annotation.image.height(), layers));
  }
  if (!job.out_trace.empty()) io::write_file(job.out_trace, io::format_trace(r.trace));
  return r.warnings;
}

/// Manifest lines: "image points out_dota [out_svg]".
inline std::vector<FitJob> parse_manifest(const std::string& path) {
  std::vector<FitJob> jobs;
  io::for_each_record(io::read_file(path), [&](int ln, std::string_view line) {
    const auto tok = io::split_ws(line);
    if (tok.size() != 3 && tok.size() != 4) throw io::parse_error(ln, "expected \"image points out_dota [out_svg]\"");
    FitJob j{std::string(tok[0]), std::string(tok[1]), std::string(tok[2]), tok.size() == 4 ? std::string(tok[3]) : "",
             "", ""};
    jobs.push_back(std::move(j));
  });
  return jobs;
}

/// Fits every job on a pool of `jobs` workers. Per-scene errors are reported
/// after all workers finish, in manifest order.
inline int run_fit_pool(const std::vector<FitJob>& jobs, const FitConfig& cfg, int workers, std::ostream& err) {
  std::vector<std::vector<std::string>> warnings(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        warnings[i] = run_fit_job(jobs[i], cfg);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  int code = kExitOk;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    for (const auto& w : warnings[i]) err << "warning: " << jobs[i].image << ": " << w << "\n";
    if (!errors[i].empty()) {
      err << "error: " << jobs[i].image << ": " << errors[i] << "\n";
      code = kExitData;
    }
  }
  return code;
}

}  // namespace cli

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Oriented boxes from point annotations"};
  app.name("p2rb");
  app.require_subcommand(1, 1);

  // synth
  auto* synth = app.add_subcommand("synth", "Render a synthetic scene with ground truth and points");
  SynthConfig sc;
  std::string synth_out, synth_layout = "grid", synth_format = "png";
  double contrast_levels = 60.0, noise_levels = 8.0;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", sc.seed, "Random seed");
  synth->add_option("--width", sc.width, "Image width")->capture_default_str();
  synth->add_option("--height", sc.height, "Image height")->capture_default_str();
  synth->add_option("--min-count", sc.min_count)->capture_default_str();
  synth->add_option("--max-count", sc.max_count)->capture_default_str();
  synth->add_option("--min-size", sc.min_size, "Smallest long side (px)")->capture_default_str();
  synth->add_option("--max-size", sc.max_size, "Largest long side (px)")->capture_default_str();
  synth->add_option("--min-aspect", sc.min_aspect)->capture_default_str();
  synth->add_option("--max-aspect", sc.max_aspect)->capture_default_str();
  synth->add_option("--layout", synth_layout)->check(CLI::IsMember({"grid", "random"}))->capture_default_str();
  synth->add_option("--max-iou", sc.max_iou)->capture_default_str();
  synth->add_option("--min-gap", sc.min_gap, "Clearance between objects (px)")->capture_default_str();
  synth->add_option("--contrast", contrast_levels, "Object contrast in 8-bit levels")->capture_default_str();
  synth->add_option("--noise", noise_levels, "Pixel noise sigma in 8-bit levels")->capture_default_str();
  synth->add_option("--jitter", sc.point_jitter, "Point jitter as a fraction of object height")->capture_default_str();
  synth->add_option("--classes", sc.class_count)->capture_default_str();
  synth->add_option("--format", synth_format)->check(CLI::IsMember({"png", "pgm"}))->capture_default_str();

  // voronoi
  auto* vor = app.add_subcommand("voronoi", "Raster Voronoi partition of the points");
  std::string vor_points, vor_image, vor_out, vor_png, vor_ridges;
  int vor_w = 0, vor_h = 0;
  vor->add_option("--points", vor_points)->required();
  vor->add_option("--image", vor_image, "Image that fixes the raster size");
  vor->add_option("--width", vor_w);
  vor->add_option("--height", vor_h);
  vor->add_option("--out", vor_out, "16-bit PGM label map")->required();
  vor->add_option("--out-png", vor_png, "Color rendering of the labels");
  vor->add_option("--out-ridges", vor_ridges, "8-bit ridge mask");

  // watershed
  auto* ws = app.add_subcommand("watershed", "Marker watershed seeded at the points");
  std::string ws_image, ws_points, ws_out, ws_png, ws_surface = "gradient", ws_barriers = "background";
  ws->add_option("--image", ws_image)->required();
  ws->add_option("--points", ws_points)->required();
  ws->add_option("--out", ws_out, "16-bit PGM label map")->required();
  ws->add_option("--out-png", ws_png);
  ws->add_option("--surface", ws_surface)->check(CLI::IsMember({"gradient", "intensity"}))->capture_default_str();
  ws->add_option("--barriers", ws_barriers)->check(CLI::IsMember({"background", "wall"}))->capture_default_str();

  // fit
  auto* fit = app.add_subcommand("fit", "Fit oriented boxes to point annotations");
  cli::FitJob job;
  std::string fit_config, fit_manifest;
  std::optional<std::uint64_t> fit_seed;
  std::optional<int> fit_iterations;
  bool fit_ss = false;
  int fit_jobs = 1;
  fit->add_option("--image", job.image);
  fit->add_option("--points", job.points);
  fit->add_option("--config", fit_config, "key = value configuration file");
  fit->add_option("--out-dota", job.out_dota);
  fit->add_option("--out-svg", job.out_svg);
  fit->add_option("--out-trace", job.out_trace, "Per-iteration loss trace");
  fit->add_option("--edge-map", job.edge_map, "Edge map image replacing the Sobel map");
  fit->add_flag("--with-ss", fit_ss, "Add the consistency term against a transformed copy");
  fit->add_option("--seed", fit_seed);
  fit->add_option("--iterations", fit_iterations);
  fit->add_option("--manifest", fit_manifest, "Scene list: image points out_dota [out_svg] per line");
  fit->add_option("--jobs", fit_jobs, "Worker threads for --manifest")->check(CLI::PositiveNumber);

  // loss
  auto* loss = app.add_subcommand("loss", "Print per-term losses for given boxes");
  std::string loss_image, loss_points, loss_boxes, loss_config;
  std::optional<std::uint64_t> loss_seed;
  bool loss_ss = false;
  loss->add_option("--image", loss_image)->required();
  loss->add_option("--points", loss_points)->required();
  loss->add_option("--boxes", loss_boxes, "DOTA boxes index-aligned with the points")->required();
  loss->add_option("--config", loss_config);
  loss->add_flag("--with-ss", loss_ss);
  loss->add_option("--seed", loss_seed);

  // eval
  auto* ev = app.add_subcommand("eval", "Compare predicted boxes with ground truth");
  std::string ev_pred, ev_gt, ev_out;
  ev->add_option("--pred", ev_pred)->required();
  ev->add_option("--gt", ev_gt)->required();
  ev->add_option("--out", ev_out, "Write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  auto read_config = [&](const std::string& path) {
    return path.empty() ? FitConfig{} : io::parse_fit_config(io::read_file(path));
  };

  try {
    if (*synth) {
      sc.layout = synth_layout == "grid" ? SynthLayout::Grid : SynthLayout::RandomPacked;
      sc.contrast = contrast_levels / 255.0;
      sc.noise_sigma = noise_levels / 255.0;
      const SynthScene s = synth_scene(sc);
      std::filesystem::create_directories(synth_out);
      const std::filesystem::path dir(synth_out);
      io::write_image((dir / ("image." + synth_format)).string(), s.image);
      std::vector<io::DotaRecord> gt;
      std::vector<io::PointRecord> pts;
      for (std::size_t i = 0; i < s.gt_boxes.size(); ++i) {
        const std::string cat = "c" + std::to_string(s.annotation.instances[i].class_id);
        gt.push_back({s.gt_boxes[i], cat, 0});
        pts.push_back({s.annotation.instances[i].point, cat});
      }
      io::write_file((dir / "gt.txt").string(), io::emit_dota(gt));
      io::write_file((dir / "points.txt").string(), io::emit_points(pts));
      out << "objects=" << s.gt_boxes.size() << "\n";
      return kExitOk;
    }

    if (*vor) {
      int w = vor_w, h = vor_h;
      if (!vor_image.empty()) {
        const Image img = io::read_image(vor_image);
        w = img.width();
        h = img.height();
      }
      if (w <= 0 || h <= 0) {
        err << "error: voronoi needs --image or a positive --width and --height\n" << vor->help();
        return kExitUsage;
      }
      std::vector<Point2> pts;
      for (const auto& r : io::parse_points(io::read_file(vor_points))) pts.push_back(r.point);
      const VoronoiResult v = voronoi_partition(pts, w, h);
      cli::warn_all(err, v.warnings);
      io::write_file(vor_out, io::encode_pgm16(io::encode_labels(v.labels)));
      if (!vor_png.empty()) io::write_file(vor_png, io::encode_png_rgb(io::colorize_labels(v.labels)));
      if (!vor_ridges.empty()) {
        Image mask(w, h, 0.0);
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = v.ridges[i] ? 1.0 : 0.0;
        io::write_image(vor_ridges, mask);
      }
      std::size_t cells = 0;
      for (std::size_t i = 0; i < pts.size(); ++i) cells += v.representative[i] == static_cast<int>(i);
      out << "cells=" << cells << "\n";
      return kExitOk;
    }

    if (*ws) {
      const cli::Scene scene = cli::load_scene(ws_image, ws_points);
      const auto pts = scene.annotation.points();
      const VoronoiResult v = voronoi_partition(pts, scene.annotation.image.width(), scene.annotation.image.height());
      cli::warn_all(err, v.warnings);
      std::vector<Point2> markers;
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (v.representative[i] == static_cast<int>(i)) markers.push_back(pts[i]);
      const auto surface = make_surface(scene.annotation.image, ws_surface == "gradient" ? SurfaceMode::GradientMagnitude
                                                                                         : SurfaceMode::RawIntensity);
      const auto labels = watershed(surface, markers, v.ridges,
                                    ws_barriers == "background" ? BarrierMode::BackgroundSeeds : BarrierMode::Wall);
      io::write_file(ws_out, io::encode_pgm16(io::encode_labels(labels)));
      if (!ws_png.empty()) io::write_file(ws_png, io::encode_png_rgb(io::colorize_labels(labels)));
      const auto basins = basin_pixels(labels, markers.size());
      for (std::size_t i = 0; i < basins.size(); ++i) out << "basin." << i << ".pixels=" << basins[i].size() << "\n";
      return kExitOk;
    }

    if (*fit) {
      FitConfig cfg = read_config(fit_config);
      if (fit_seed) cfg.seed = *fit_seed;
      if (fit_iterations) cfg.iterations = *fit_iterations;
      if (fit_ss) cfg.with_ss = true;
      validate(cfg);
      if (!fit_manifest.empty()) {
        if (!job.image.empty() || !job.points.empty()) {
          err << "error: --manifest cannot be combined with --image/--points\n" << fit->help();
          return kExitUsage;
        }
        return cli::run_fit_pool(cli::parse_manifest(fit_manifest), cfg, fit_jobs, err);
      }
      if (job.image.empty() || job.points.empty() || job.out_dota.empty()) {
        err << "error: fit needs --image, --points and --out-dota (or --manifest)\n" << fit->help();
        return kExitUsage;
      }
      cli::warn_all(err, cli::run_fit_job(job, cfg));
      return kExitOk;
    }

    if (*loss) {
      FitConfig cfg = read_config(loss_config);
      if (loss_seed) cfg.seed = *loss_seed;
      if (loss_ss) cfg.with_ss = true;
      const cli::Scene scene = cli::load_scene(loss_image, loss_points);
      const auto parsed = io::parse_dota(io::read_file(loss_boxes));
      cli::warn_all(err, parsed.warnings);
      std::vector<RBox> boxes;
      for (const auto& r : parsed.records) boxes.push_back(r.box);
      if (boxes.size() != scene.annotation.instances.size())
        throw Error(ErrorKind::Alignment, "loss: " + std::to_string(boxes.size()) + " boxes for " +
                                              std::to_string(scene.annotation.instances.size()) + " points");
      const SceneCache cache = build_scene_cache(scene.annotation, cfg);
      cli::warn_all(err, cache.warnings);
      std::optional<SsReference> ref;
      if (cfg.with_ss) {
        std::mt19937_64 rng(cfg.seed);
        ref = detail::make_ss_reference(boxes, cfg, rng);
      }
      const LossBreakdown l = total_layout_loss(boxes, scene.annotation, cache, cfg, ref ? &*ref : nullptr);
      out << "total=" << io::fmt_g(l.total) << "\n"
          << "overlap=" << io::fmt_g(l.overlap) << "\n"
          << "watershed=" << io::fmt_g(l.watershed) << "\n"
          << "edge=" << io::fmt_g(l.edge) << "\n"
          << "ss=" << io::fmt_g(l.ss) << "\n"
          << "tightness=" << io::fmt_g(l.tightness) << "\n";
      return kExitOk;
    }

    if (*ev) {
      const auto report = evaluate(cli::load_labeled(ev_pred, err), cli::load_labeled(ev_gt, err));
      const std::string text = io::format_report(report);
      if (ev_out.empty())
        out << text;
      else
        io::write_file(ev_out, text);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace p2rb
