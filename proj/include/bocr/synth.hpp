#pragma once

// Synthetic Bangla-like page generator with exact ground truth.
//
// Box-glyph mode draws every character as a distinct stroke pattern hanging
// from a headline bar that spans the whole word, so pages carry real matra
// semantics without font assets. Atlas mode hangs user-supplied glyph
// bitmaps from the same headline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bocr/error.hpp"
#include "bocr/image.hpp"
#include "bocr/image_io.hpp"
#include "bocr/raster.hpp"
#include "json.hpp"

namespace bocr {

struct IntRange {
  int min = 0;
  int max = 0;
  bool valid() const noexcept { return min <= max; }
  friend bool operator==(const IntRange&, const IntRange&) = default;
};

enum class GlyphSource { Boxes, Atlas };

struct MultiFontDefect {
  double scale = 2.0;
  int line = 0;  // index of the line whose first word is drawn large
  friend bool operator==(const MultiFontDefect&, const MultiFontDefect&) = default;
};

struct Defects {
  double skew_deg = 0;
  double warp_amplitude_px = 0;
  double noise_rate = 0;         // fraction of perturbed pixels
  int border_px = 0;             // dark frame thickness at the image edge
  std::optional<MultiFontDefect> multifont;
  double lighting = 0;           // darkening factor at the left edge, fading to 0 at the right
  friend bool operator==(const Defects&, const Defects&) = default;
};

struct PageSpec {
  int width = 1000;
  int height = 1400;
  int lines = 12;
  IntRange words_per_line{3, 6};
  IntRange chars_per_word{2, 5};
  GlyphSource glyph_source = GlyphSource::Boxes;
  std::string atlas_dir;
  int font_px = 32;
  int margin_px = 100;
  int line_gap_px = 14;
  IntRange word_gap_px{18, 22};
  IntRange char_gap_px{4, 7};
  // Perturbed pixels move this many levels toward the opposite polarity.
  IntRange noise_amplitude{30, 55};
  std::uint8_t background = 250;
  std::uint8_t ink = 25;
  Defects defects;
  std::uint64_t seed = 1;

  friend bool operator==(const PageSpec&, const PageSpec&) = default;
};

inline void validate(const PageSpec& s) {
  if (s.width < 64 || s.height < 64) throw ParameterError("page spec: page must be at least 64x64");
  if (s.lines < 1) throw ParameterError("page spec: lines must be >= 1");
  if (!s.words_per_line.valid() || s.words_per_line.min < 1) throw ParameterError("page spec: words_per_line range empty");
  if (!s.chars_per_word.valid() || s.chars_per_word.min < 1) throw ParameterError("page spec: chars_per_word range empty");
  if (!s.word_gap_px.valid() || !s.char_gap_px.valid() || !s.noise_amplitude.valid())
    throw ParameterError("page spec: gap/noise ranges empty");
  if (s.font_px < 8) throw ParameterError("page spec: font_px must be >= 8");
  if (s.defects.noise_rate < 0 || s.defects.noise_rate > 0.05) throw ParameterError("page spec: noise_rate must be in [0, 0.05]");
  if (std::abs(s.defects.skew_deg) > 5) throw ParameterError("page spec: |skew_deg| must be <= 5");
  if (s.defects.border_px < 0) throw ParameterError("page spec: border_px must be >= 0");
  if (s.defects.lighting < 0 || s.defects.lighting >= 1) throw ParameterError("page spec: lighting must be in [0, 1)");
  if (s.defects.multifont && (s.defects.multifont->scale < 1 || s.defects.multifont->line < 0 ||
                              s.defects.multifont->line + 1 >= s.lines))
    throw ParameterError("page spec: multifont needs scale >= 1 and a following line");
}

struct TruthChar {
  int line = 0;
  int word = 0;
  int chr = 0;
  Box box;        // canonical (pre-defect) coordinates
  Box final_box;  // after warp and skew
  friend bool operator==(const TruthChar&, const TruthChar&) = default;
};

struct GroundTruth {
  int width = 0;
  int height = 0;
  Defects defects;
  std::vector<TruthChar> chars;  // sorted by (line, word, char)

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct GeneratedPage {
  GrayImage image;
  GroundTruth truth;
};

namespace detail {

// Deterministic uniform draws; std distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  int range(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }
  int range(const IntRange& r) { return range(r.min, r.max); }

 private:
  std::mt19937_64 eng_;
};

struct Canvas {
  GrayImage& img;
  std::uint8_t ink;
  void fill(int x0, int y0, int x1, int y1) {  // half-open
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, img.width());
    y1 = std::min(y1, img.height());
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) img(x, y) = ink;
  }
};

constexpr int kGlyphPatterns = 6;

// Draw one box glyph in [x, x+gw) x [y, y+gh). Every column receives ink
// from the bottom bar, and horizontal strokes in the upper half cover at most
// half the glyph width, so the headline stays the dominant upper-half row.
inline void draw_box_glyph(Canvas& c, int x, int y, int gw, int gh, int t, int pattern) {
  const int bottom = y + gh;
  c.fill(x, bottom - t, x + gw, bottom);
  switch (pattern) {
    case 0:  // U
      c.fill(x, y, x + t, bottom);
      c.fill(x + gw - t, y, x + gw, bottom);
      break;
    case 1: {  // stem with a lower-right loop
      c.fill(x, y, x + t, bottom);
      const int ly0 = y + gh * 55 / 100, ly1 = y + gh * 85 / 100, lx0 = x + gw / 2;
      c.fill(lx0, ly0, x + gw, ly0 + t);
      c.fill(lx0, ly1 - t, x + gw, ly1);
      c.fill(lx0, ly0, lx0 + t, ly1);
      c.fill(x + gw - t, ly0, x + gw, ly1);
      break;
    }
    case 2:  // right stem, short left stem
      c.fill(x + gw - t, y, x + gw, bottom);
      c.fill(x, y + gh / 2, x + t, bottom);
      break;
    case 3:  // center stem with a lower crossbar
      c.fill(x + (gw - t) / 2, y, x + (gw + t) / 2, bottom);
      c.fill(x, y + gh * 62 / 100, x + gw, y + gh * 62 / 100 + t);
      break;
    case 4: {  // stem and diagonal
      c.fill(x, y, x + t, bottom);
      const int x0 = x + t, x1 = x + gw - t;
      for (int yy = y; yy < bottom - t; ++yy) {
        const int xx = x0 + (x1 - x0) * (yy - y) / std::max(1, bottom - t - y);
        c.fill(xx, yy, xx + t, yy + 1);
      }
      break;
    }
    default:  // two-storey: stem, short upper arm, lower right stem
      c.fill(x, y, x + t, bottom);
      c.fill(x, y + gh * 30 / 100, x + gw / 2, y + gh * 30 / 100 + t);
      c.fill(x + gw - t, y + gh / 2, x + gw, bottom);
      break;
  }
}

struct AtlasGlyph {
  BinaryImage ink;
};

inline std::vector<AtlasGlyph> load_atlas(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(dir)) {
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".png" || ext == ".PNG")) files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<AtlasGlyph> out;
  for (const auto& f : files) {
    const auto gray = read_gray(f.string());
    BinaryImage ink(gray.width(), gray.height());
    std::transform(gray.data().begin(), gray.data().end(), ink.data().begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v < 128); });
    out.push_back({std::move(ink)});
  }
  if (out.empty()) throw ParameterError("atlas mode: no glyph images in '" + dir + "'");
  return out;
}

// Where a canonical point lands after the warp and skew defects.
struct DefectMap {
  int width, height;
  double amp, skew_deg;

  std::pair<double, double> forward(double x, double y) const {
    y += amp * std::sin(std::numbers::pi * x / width);
    if (skew_deg == 0) return {x, y};
    // Inverse of the sampling map used by rotate().
    const double t = skew_deg * std::numbers::pi / 180.0, c = std::cos(t), s = std::sin(t);
    const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
    const double dx = x - cx, dy = y - cy;
    return {cx + dx * c + dy * s, cy - dx * s + dy * c};
  }

  Box forward(const Box& b) const {
    double x0 = 1e18, y0 = 1e18, x1 = -1e18, y1 = -1e18;
    for (int i = 0; i <= 8; ++i) {
      const double px = b.x + (b.w - 1) * i / 8.0;
      for (double py : {double(b.y), double(b.bottom() - 1)}) {
        const auto [fx, fy] = forward(px, py);
        x0 = std::min(x0, fx), x1 = std::max(x1, fx), y0 = std::min(y0, fy), y1 = std::max(y1, fy);
      }
    }
    for (double px : {double(b.x), double(b.right() - 1)}) {
      for (int i = 0; i <= 8; ++i) {
        const auto [fx, fy] = forward(px, b.y + (b.h - 1) * i / 8.0);
        x0 = std::min(x0, fx), x1 = std::max(x1, fx), y0 = std::min(y0, fy), y1 = std::max(y1, fy);
      }
    }
    const int ix0 = static_cast<int>(std::floor(x0)), iy0 = static_cast<int>(std::floor(y0));
    return {ix0, iy0, static_cast<int>(std::ceil(x1)) + 1 - ix0, static_cast<int>(std::ceil(y1)) + 1 - iy0};
  }
};

}  // namespace detail

// Render a page and its ground truth. Defects are applied in the order
// multifont (layout) -> warp -> skew -> border -> lighting/noise.
inline GeneratedPage generate(const PageSpec& spec) {
  validate(spec);
  detail::Rng rng(spec.seed);
  std::vector<detail::AtlasGlyph> atlas;
  if (spec.glyph_source == GlyphSource::Atlas) atlas = detail::load_atlas(spec.atlas_dir);

  GrayImage canvas(spec.width, spec.height, spec.background);
  detail::Canvas pen{canvas, spec.ink};
  GroundTruth truth;
  truth.width = spec.width;
  truth.height = spec.height;
  truth.defects = spec.defects;

  const int right_limit = spec.width - spec.margin_px;

  // Lays out one word starting at (x, top) with the given font size; returns
  // the word's right edge, or -1 if it does not fit before `right_limit`.
  const auto draw_word = [&](int x, int top, int font, int line, int word, bool force) -> int {
    const int t = std::max(2, static_cast<int>(std::lround(font / 10.0)));
    const int body = font - t;
    const int n = rng.range(spec.chars_per_word);
    std::vector<int> widths(n), gaps(n > 0 ? n - 1 : 0), patterns(n);
    int total = 0;
    for (int i = 0; i < n; ++i) {
      if (spec.glyph_source == GlyphSource::Atlas) {
        patterns[i] = rng.range(0, static_cast<int>(atlas.size()) - 1);
        const auto& g = atlas[patterns[i]].ink;
        widths[i] = std::max(t + 1, static_cast<int>(std::lround(static_cast<double>(g.width()) * body / g.height())));
      } else {
        patterns[i] = rng.range(0, detail::kGlyphPatterns - 1);
        widths[i] = rng.range(font / 2, font * 8 / 10);
      }
      total += widths[i];
      if (i + 1 < n) {
        gaps[i] = std::max(2, static_cast<int>(std::lround(rng.range(spec.char_gap_px) * font / double(spec.font_px))));
        total += gaps[i];
      }
    }
    if (!force && x + total > right_limit) return -1;
    pen.fill(x, top, x + total, top + t);  // headline
    int cx = x;
    for (int i = 0; i < n; ++i) {
      if (spec.glyph_source == GlyphSource::Atlas) {
        const auto scaled = scale_rows_nearest(atlas[patterns[i]].ink, body);
        for (int yy = 0; yy < body; ++yy)
          for (int xx = 0; xx < widths[i]; ++xx) {
            const int sx = std::min(scaled.width() - 1, xx * scaled.width() / widths[i]);
            if (scaled(sx, yy)) pen.fill(cx + xx, top + t + yy, cx + xx + 1, top + t + yy + 1);
          }
        // Anchor the glyph to the headline and give every column a foot.
        pen.fill(cx, top + t, cx + std::min(t, widths[i]), top + font);
        pen.fill(cx, top + font - t, cx + widths[i], top + font);
      } else {
        detail::draw_box_glyph(pen, cx, top + t, widths[i], body, t, patterns[i]);
      }
      truth.chars.push_back({line, word, i, Box{cx, top, widths[i], font}, {}});
      cx += widths[i] + (i + 1 < n ? gaps[i] : 0);
    }
    return x + total;
  };

  const auto fill_line = [&](int x, int top, int line, int first_word) {
    const int n_words = rng.range(spec.words_per_line);
    int word = first_word;
    for (int k = 0; k < n_words; ++k) {
      const int end = draw_word(x, top, spec.font_px, line, word, word == 0);
      if (end < 0) break;
      ++word;
      x = end + rng.range(spec.word_gap_px);
    }
  };

  int top = spec.margin_px;
  for (int line = 0; line < spec.lines; ++line) {
    if (top + spec.font_px > spec.height - spec.margin_px) break;
    const auto& mf = spec.defects.multifont;
    if (mf && mf->line == line) {
      const int big_font = static_cast<int>(std::lround(spec.font_px * mf->scale));
      const int big_right = draw_word(spec.margin_px, top, big_font, line, 0, true);
      const int x = big_right + 2 * spec.word_gap_px.max;
      fill_line(x, top, line, 1);
      const int second = top + spec.font_px + spec.line_gap_px;
      fill_line(x, second, line + 1, 0);
      top = std::max(top + big_font, second + spec.font_px) + spec.line_gap_px;
      ++line;
      continue;
    }
    fill_line(spec.margin_px, top, line, 0);
    top += spec.font_px + spec.line_gap_px;
  }

  const detail::DefectMap map{spec.width, spec.height, spec.defects.warp_amplitude_px, spec.defects.skew_deg};
  GrayImage img = canvas;
  if (spec.defects.warp_amplitude_px != 0) {
    GrayImage warped(spec.width, spec.height, spec.background);
    for (int x = 0; x < spec.width; ++x) {
      const double d = spec.defects.warp_amplitude_px * std::sin(std::numbers::pi * x / spec.width);
      for (int y = 0; y < spec.height; ++y) warped(x, y) = clamp_u8(sample_bilinear(canvas, x, y - d, spec.background));
    }
    img = std::move(warped);
  }
  if (spec.defects.skew_deg != 0) img = rotate(img, spec.defects.skew_deg, spec.background);
  if (const int b = spec.defects.border_px; b > 0) {
    detail::Canvas frame{img, 40};
    frame.fill(0, 0, spec.width, b);
    frame.fill(0, spec.height - b, spec.width, spec.height);
    frame.fill(0, 0, b, spec.height);
    frame.fill(spec.width - b, 0, spec.width, spec.height);
  }
  if (spec.defects.lighting > 0) {
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x)
        img(x, y) = clamp_u8(img(x, y) * (1.0 - spec.defects.lighting * (1.0 - double(x) / (spec.width - 1))));
  }
  if (spec.defects.noise_rate > 0) {
    // A separate stream keeps layout draws independent of the noise level.
    detail::Rng noise(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    for (auto& v : img.data()) {
      if (noise.uniform() >= spec.defects.noise_rate) continue;
      const int amp = noise.range(spec.noise_amplitude);
      v = clamp_u8(v >= 128 ? v - amp : v + amp);
    }
  }

  for (auto& c : truth.chars) c.final_box = map.forward(c.box);
  std::sort(truth.chars.begin(), truth.chars.end(), [](const TruthChar& a, const TruthChar& b) {
    return std::tie(a.line, a.word, a.chr) < std::tie(b.line, b.word, b.chr);
  });
  return {std::move(img), std::move(truth)};
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const Box& b) { j = {{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}}; }
inline void from_json(const nlohmann::json& j, Box& b) {
  b = {j.at("x").get<int>(), j.at("y").get<int>(), j.at("w").get<int>(), j.at("h").get<int>()};
}
inline void to_json(nlohmann::json& j, const IntRange& r) { j = nlohmann::json::array({r.min, r.max}); }
inline void from_json(const nlohmann::json& j, IntRange& r) { r = {j.at(0).get<int>(), j.at(1).get<int>()}; }

inline void to_json(nlohmann::json& j, const Defects& d) {
  j = {{"skew_deg", d.skew_deg},      {"warp_amplitude_px", d.warp_amplitude_px},
       {"noise_rate", d.noise_rate},  {"border_px", d.border_px},
       {"lighting", d.lighting},      {"multifont", nullptr}};
  if (d.multifont) j["multifont"] = {{"scale", d.multifont->scale}, {"line", d.multifont->line}};
}
inline void from_json(const nlohmann::json& j, Defects& d) {
  d = {};
  d.skew_deg = j.value("skew_deg", 0.0);
  d.warp_amplitude_px = j.value("warp_amplitude_px", 0.0);
  d.noise_rate = j.value("noise_rate", 0.0);
  d.border_px = j.value("border_px", 0);
  d.lighting = j.value("lighting", 0.0);
  if (j.contains("multifont") && !j.at("multifont").is_null())
    d.multifont = MultiFontDefect{j.at("multifont").value("scale", 2.0), j.at("multifont").value("line", 0)};
}

inline void to_json(nlohmann::json& j, const PageSpec& s) {
  j = {{"width", s.width},
       {"height", s.height},
       {"lines", s.lines},
       {"words_per_line", s.words_per_line},
       {"chars_per_word", s.chars_per_word},
       {"glyph_source", s.glyph_source == GlyphSource::Boxes ? "boxes" : "atlas"},
       {"atlas_dir", s.atlas_dir},
       {"font_px", s.font_px},
       {"margin_px", s.margin_px},
       {"line_gap_px", s.line_gap_px},
       {"word_gap_px", s.word_gap_px},
       {"char_gap_px", s.char_gap_px},
       {"noise_amplitude", s.noise_amplitude},
       {"defects", s.defects},
       {"seed", s.seed}};
}

// Missing keys keep their defaults.
inline void from_json(const nlohmann::json& j, PageSpec& s) {
  s = {};
  const auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  opt("width", s.width);
  opt("height", s.height);
  opt("lines", s.lines);
  opt("words_per_line", s.words_per_line);
  opt("chars_per_word", s.chars_per_word);
  if (j.contains("glyph_source")) {
    const auto src = j.at("glyph_source").get<std::string>();
    if (src == "boxes") s.glyph_source = GlyphSource::Boxes;
    else if (src == "atlas") s.glyph_source = GlyphSource::Atlas;
    else throw ParameterError("page spec: unknown glyph_source '" + src + "'");
  }
  opt("atlas_dir", s.atlas_dir);
  opt("font_px", s.font_px);
  opt("margin_px", s.margin_px);
  opt("line_gap_px", s.line_gap_px);
  opt("word_gap_px", s.word_gap_px);
  opt("char_gap_px", s.char_gap_px);
  opt("noise_amplitude", s.noise_amplitude);
  opt("defects", s.defects);
  opt("seed", s.seed);
}

inline void to_json(nlohmann::json& j, const GroundTruth& t) {
  j = {{"width", t.width}, {"height", t.height}, {"defects", t.defects}, {"chars", nlohmann::json::array()}};
  for (const auto& c : t.chars)
    j["chars"].push_back({{"line", c.line}, {"word", c.word}, {"char", c.chr}, {"box", c.box}, {"final_box", c.final_box}});
}
inline void from_json(const nlohmann::json& j, GroundTruth& t) {
  t = {};
  t.width = j.at("width").get<int>();
  t.height = j.at("height").get<int>();
  t.defects = j.at("defects").get<Defects>();
  for (const auto& c : j.at("chars"))
    t.chars.push_back({c.at("line").get<int>(), c.at("word").get<int>(), c.at("char").get<int>(),
                       c.at("box").get<Box>(), c.at("final_box").get<Box>()});
}

}  // namespace bocr
