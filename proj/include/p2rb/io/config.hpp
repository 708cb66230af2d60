// SPDX-License-Identifier: Apache-2.0
//
// Fit configuration as line-oriented "key = value" text. See FORMATS.md for
// the key list.
#pragma once

#include <string>
#include <string_view>

#include "p2rb/error.hpp"
#include "p2rb/fitter.hpp"
#include "p2rb/io/text.hpp"

namespace p2rb::io {

namespace detail {

inline double num(int line_no, std::string_view key, std::string_view v) {
  double d = 0.0;
  if (!parse_double(v, d)) throw parse_error(line_no, std::string(key) + ": expected a number");
  return d;
}

inline long long integer(int line_no, std::string_view key, std::string_view v) {
  long long i = 0;
  if (!parse_int(v, i)) throw parse_error(line_no, std::string(key) + ": expected an integer");
  return i;
}

inline bool boolean(int line_no, std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw parse_error(line_no, std::string(key) + ": expected true or false");
}

}  // namespace detail

/// Applies the settings in `text` on top of `cfg`. Unknown keys are errors.
inline FitConfig parse_fit_config(std::string_view text, FitConfig cfg = {}) {
  for_each_record(text, [&](int ln, std::string_view line) {
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw parse_error(ln, "expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view val = trim(line.substr(eq + 1));
    using namespace detail;
    if (key == "w_overlap") cfg.weights.overlap = num(ln, key, val);
    else if (key == "w_watershed") cfg.weights.watershed = num(ln, key, val);
    else if (key == "w_edge") cfg.weights.edge = num(ln, key, val);
    else if (key == "w_ss") cfg.weights.ss = num(ln, key, val);
    else if (key == "tightness_ratio") cfg.tightness_ratio = num(ln, key, val);
    else if (key == "iterations") cfg.iterations = static_cast<int>(integer(ln, key, val));
    else if (key == "step") cfg.step = num(ln, key, val);
    else if (key == "refine_centers") cfg.refine_centers = boolean(ln, key, val);
    else if (key == "center_step") cfg.center_step = num(ln, key, val);
    else if (key == "K") cfg.edge.K = static_cast<int>(integer(ln, key, val));
    else if (key == "beta") cfg.edge.beta = num(ln, key, val);
    else if (key == "sigma_e") cfg.edge.sigma_e = num(ln, key, val);
    else if (key == "init_min") cfg.init_min = num(ln, key, val);
    else if (key == "init_max") cfg.init_max = num(ln, key, val);
    else if (key == "init_single") cfg.init_single = num(ln, key, val);
    else if (key == "fd_step") cfg.fd_step = num(ln, key, val);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(integer(ln, key, val));
    else if (key == "with_ss") cfg.with_ss = boolean(ln, key, val);
    else if (key == "p_rotation") cfg.proportions.rotation = num(ln, key, val);
    else if (key == "p_flip") cfg.proportions.flip = num(ln, key, val);
    else if (key == "p_scale") cfg.proportions.scale = num(ln, key, val);
    else if (key == "gradient") {
      if (val == "analytic") cfg.gradient = GradientMode::Analytic;
      else if (val == "finite-difference") cfg.gradient = GradientMode::FiniteDifference;
      else throw parse_error(ln, "gradient: expected analytic or finite-difference");
    } else if (key == "gwd") {
      if (val == "log1p") cfg.gwd = GwdForm::Log1p;
      else if (val == "raw") cfg.gwd = GwdForm::Raw;
      else if (val == "invsqrt") cfg.gwd = GwdForm::InvSqrt;
      else throw parse_error(ln, "gwd: expected log1p, raw or invsqrt");
    } else if (key == "surface") {
      if (val == "gradient") cfg.surface = SurfaceMode::GradientMagnitude;
      else if (val == "intensity") cfg.surface = SurfaceMode::RawIntensity;
      else throw parse_error(ln, "surface: expected gradient or intensity");
    } else if (key == "barriers") {
      if (val == "background") cfg.barriers = BarrierMode::BackgroundSeeds;
      else if (val == "wall") cfg.barriers = BarrierMode::Wall;
      else throw parse_error(ln, "barriers: expected background or wall");
    } else {
      throw parse_error(ln, "unknown key '" + std::string(key) + "'");
    }
  });
  validate(cfg);
  return cfg;
}

}  // namespace p2rb::io
