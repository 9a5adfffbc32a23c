#pragma once

// Pipeline configuration: every tunable plus stage toggles, loaded from a
// flat JSON object. Missing keys keep their compiled-in defaults.

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <type_traits>

#include "bocr/error.hpp"
#include "bocr/preprocess.hpp"
#include "bocr/segment.hpp"
#include "json.hpp"

namespace bocr {

struct PipelineConfig {
  CropOptions crop;
  SkewOptions skew;
  SpanOptions spans;
  DewarpOptions dewarp;
  double denoise_sigma = 0.8;
  BinarizeOptions binarize;
  LineOptions lines;
  double multifont_factor = 1.6;
  WordOptions words;
  CharOptions chars;

  bool enable_crop = true;
  bool enable_skew = true;
  bool enable_dewarp = true;
  bool enable_denoise = true;
  bool enable_multifont = true;
  bool crop_before_skew = true;  // false runs skew correction on the raw capture
  bool write_crops = true;
  bool debug_overlays = false;
};

namespace detail {

// Visits (name, field, lo, hi) for every numeric field and (name, field) for
// every boolean. Works on const and non-const configs.
template <class C, class V>
void visit_fields(C& c, V&& v) {
  v("canny_low", c.crop.canny_low, 0.0, 1e4);
  v("canny_high", c.crop.canny_high, 0.0, 1e4);
  v("rank_length", c.crop.rank_length, 3, 1001);
  v("rank_support", c.crop.rank_support, 1, 1001);
  v("crop_min_component", c.crop.min_component, 1, 1000000);
  v("crop_margin", c.crop.margin, 0, 10000);
  v("skew_range", c.skew.range_deg, 0.0, 45.0);
  v("skew_step", c.skew.step_deg, 0.01, 45.0);
  v("span_kernel_w", c.spans.kernel_w, 1, 1001);
  v("span_kernel_h", c.spans.kernel_h, 1, 1001);
  v("span_max_height_factor", c.spans.max_height_factor, 1.0, 100.0);
  v("span_min_width_fraction", c.spans.min_width_fraction, 0.0, 1.0);
  v("span_step", c.spans.step, 1, 10000);
  v("focal", c.dewarp.focal, 0.1, 100.0);
  v("dewarp_initial_pitch", c.dewarp.initial_pitch, 0.01, 1.5);
  v("dewarp_tol", c.dewarp.tol, 1e-15, 1.0);
  v("dewarp_max_iter", c.dewarp.max_iter, 1, 1000000);
  v("dewarp_min_gain_px", c.dewarp.min_gain_px, 0.0, 1000.0);
  v("dewarp_max_ratio", c.dewarp.max_ratio, 0.0, 1.0);
  v("dewarp_verify_factor", c.dewarp.verify_factor, 0.0, 100.0);
  v("denoise_sigma", c.denoise_sigma, 0.05, 20.0);
  v("binarize_window", c.binarize.window, 3, 1001);
  v("binarize_offset", c.binarize.offset, -255, 255);
  v("line_blank_fraction", c.lines.blank_fraction, 0.0, 1.0);
  v("min_line_height", c.lines.min_line_height, 1, 10000);
  v("multifont_factor", c.multifont_factor, 1.0, 100.0);
  v("word_blank_eps", c.words.blank_eps, 0, 10000);
  v("word_gap_factor", c.words.gap_factor, 0.0, 100.0);
  v("char_blank_eps", c.chars.blank_eps, 0, 10000);
  v("min_char_ink", c.chars.min_char_ink, 0, 1000000);
  v("matra_fraction", c.chars.matra_fraction, 0.0, 1.0);
  v("char_escalate_fraction", c.chars.escalate_fraction, 0.0, 1.0);
  v("char_wide_ratio", c.chars.wide_ratio, 0.0, 100.0);
  v("enable_crop", c.enable_crop);
  v("enable_skew", c.enable_skew);
  v("enable_dewarp", c.enable_dewarp);
  v("enable_denoise", c.enable_denoise);
  v("enable_multifont", c.enable_multifont);
  v("crop_before_skew", c.crop_before_skew);
  v("write_crops", c.write_crops);
  v("debug_overlays", c.debug_overlays);
}

inline const char* scoring_name(SkewScoring s) { return s == SkewScoring::MaxPeak ? "max_peak" : "peak_difference"; }

}  // namespace detail

// Cross-field checks; throws ConfigError naming the offending field.
inline void validate(const PipelineConfig& c) {
  detail::visit_fields(c, [](const char* name, const auto& value, auto... range) {
    if constexpr (sizeof...(range) == 2) {
      const auto [lo, hi] = std::tuple{range...};
      if (!(value >= lo && value <= hi))
        throw ConfigError(name, std::string("out of range [") + nlohmann::json(lo).dump() + ", " + nlohmann::json(hi).dump() + "]");
    }
  });
  if (c.crop.canny_low > c.crop.canny_high) throw ConfigError("canny_low", "must not exceed canny_high");
  if (c.crop.rank_length % 2 == 0) throw ConfigError("rank_length", "must be odd");
  if (c.crop.rank_support > c.crop.rank_length) throw ConfigError("rank_support", "must not exceed rank_length");
  if (c.binarize.window % 2 == 0) throw ConfigError("binarize_window", "must be odd");
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  detail::visit_fields(c, [&](const char* name, const auto& value, auto...) { j[name] = value; });
  j["skew_scoring"] = detail::scoring_name(c.skew.scoring);
  return j;
}

// Applies the keys present in `j` on top of `c`.
inline void apply_json(PipelineConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  std::set<std::string> known{"skew_scoring"};
  detail::visit_fields(c, [&](const char* name, auto& value, auto...) {
    known.insert(name);
    const auto it = j.find(name);
    if (it == j.end()) return;
    using T = std::decay_t<decltype(value)>;
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(name, "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError(name, "expected an integer");
    } else {
      if (!it->is_number()) throw ConfigError(name, "expected a number");
    }
    value = it->template get<T>();
  });
  if (const auto it = j.find("skew_scoring"); it != j.end()) {
    if (*it == "max_peak") c.skew.scoring = SkewScoring::MaxPeak;
    else if (*it == "peak_difference") c.skew.scoring = SkewScoring::PeakDifference;
    else throw ConfigError("skew_scoring", "expected \"max_peak\" or \"peak_difference\"");
  }
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError(key, "unknown key");
  validate(c);
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  apply_json(c, j);
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

// Stage names accepted by --disable and the ablation harness.
inline void disable_stage(PipelineConfig& c, const std::string& stage) {
  if (stage == "crop") c.enable_crop = false;
  else if (stage == "skew") c.enable_skew = false;
  else if (stage == "dewarp") c.enable_dewarp = false;
  else if (stage == "denoise") c.enable_denoise = false;
  else if (stage == "multifont") c.enable_multifont = false;
  else throw ConfigError("disable", "unknown stage '" + stage + "'");
}

}  // namespace bocr
