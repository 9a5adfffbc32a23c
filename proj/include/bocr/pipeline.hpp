#pragma once

// End-to-end page processing: preprocessing, segmentation, crop export,
// manifest and debug overlays, batch runs.

#include <fnmatch.h>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bocr/config.hpp"
#include "bocr/error.hpp"
#include "bocr/image.hpp"
#include "bocr/image_io.hpp"
#include "bocr/manifest.hpp"
#include "bocr/preprocess.hpp"
#include "bocr/raster.hpp"
#include "bocr/segment.hpp"

namespace bocr {

struct MatraBox {
  Box word;  // page coordinates
  int row_start = 0;
  int row_end = 0;  // page rows, inclusive
};

// Intermediate images and bands kept for overlays.
struct DebugState {
  bool retained = false;
  GrayImage original;
  GrayImage deskewed;
  GrayImage dewarped;
  BinaryImage binary;
  std::vector<Box> lines;
  std::vector<Box> words;
  std::vector<MatraBox> matras;
};

struct PageResult {
  Manifest manifest;
  GrayImage page;                // preprocessed gray page; record boxes refer to it
  std::vector<GrayImage> crops;  // parallel to manifest.records
  DebugState debug;
};

namespace detail {

inline std::string crop_name(int l, int w, int c) {
  return "L" + std::to_string(l) + "_W" + std::to_string(w) + "_C" + std::to_string(c) + ".png";
}

// A segmented line and how its rows map back to the page.
struct PageLine {
  BinaryImage image;
  int page_row = 0;  // page row of image row 0 outside the large-font columns
  std::optional<Run> large_cols;
  std::optional<Run> large_rows;  // page rows
};

inline void finish_empty(Manifest& m, const std::string& warning) {
  m.warnings.push_back(warning);
  m.records.clear();
  m.counts = {};
}

}  // namespace detail

inline PageResult process_page(const GrayImage& input, const PipelineConfig& cfg, const std::string& source_path = "") {
  validate(cfg);
  PageResult res;
  Manifest& m = res.manifest;
  m.source_path = source_path;
  m.image_dims_before = {input.width(), input.height()};
  m.config_snapshot = to_json(cfg);
  auto& dbg = res.debug;
  dbg.retained = cfg.debug_overlays;
  if (dbg.retained) dbg.original = input;

  GrayImage page = input;
  m.crop_report.crop_box = {0, 0, input.width(), input.height()};
  bool empty = false;
  const auto do_crop = [&] {
    if (!cfg.enable_crop || empty) return;
    try {
      auto r = crop_to_text(page, cfg.crop);
      page = std::move(r.image);
      m.crop_report = r.report;
    } catch (const EmptyPageError&) {
      m.crop_report.crop_box = {0, 0, page.width(), page.height()};
      empty = true;
    } catch (const DimensionError& e) {
      m.warnings.push_back(std::string("crop skipped: ") + e.what());
    }
  };
  const auto do_skew = [&] {
    if (!cfg.enable_skew || empty) return;
    auto r = correct_skew(page, cfg.skew);
    page = std::move(r.image);
    m.skew_report = std::move(r.report);
  };
  if (cfg.crop_before_skew) {
    do_crop();
    do_skew();
  } else {
    do_skew();
    do_crop();
  }
  if (dbg.retained) dbg.deskewed = page;

  const auto smooth = [&](const GrayImage& g) { return cfg.enable_denoise ? denoise(g, cfg.denoise_sigma) : g; };
  if (cfg.enable_dewarp && !empty) {
    try {
      const auto spans = detect_spans(binarize(smooth(page), cfg.binarize), cfg.spans);
      DewarpOptions opt = cfg.dewarp;
      opt.verify_binarize = cfg.binarize;
      opt.verify_blur_sigma = cfg.enable_denoise ? cfg.denoise_sigma : 0;
      opt.verify_spans = cfg.spans;
      auto r = dewarp_page(page, spans, opt);
      if (r.warning) m.warnings.push_back("dewarp fell back to identity");
      m.dewarp_residual = r.residual;
      page = std::move(r.image);
    } catch (const NoTextError&) {
      m.warnings.push_back("dewarp skipped: no text spans");
    }
  }
  if (dbg.retained) dbg.dewarped = page;
  res.page = page;
  m.image_dims_after = {page.width(), page.height()};
  if (empty) {
    detail::finish_empty(m, "empty page");
    return res;
  }

  const auto bin = binarize(smooth(page), cfg.binarize);
  if (dbg.retained) dbg.binary = bin;

  std::vector<LineBand> bands;
  try {
    bands = segment_lines(bin, cfg.lines);
  } catch (const NoTextError&) {
    detail::finish_empty(m, "empty page");
    return res;
  }
  double mean_h = 0;
  for (const auto& b : bands) mean_h += b.height();
  mean_h /= static_cast<double>(bands.size());

  std::vector<detail::PageLine> lines;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const auto img = band_image(bin, bands[i]);
    if (!cfg.enable_multifont) {
      lines.push_back({img, bands[i].row_start, std::nullopt, std::nullopt});
      continue;
    }
    MultiFontOptions mf;
    mf.height_factor = cfg.multifont_factor;
    mf.lines = cfg.lines;
    auto split = split_multifont_line(img, mean_h, static_cast<int>(i), mf);
    if (split.warning)
      m.warnings.push_back("line band " + std::to_string(i) + " is oversized but could not be split");
    for (auto& s : split.lines) {
      std::optional<Run> rows;
      if (s.large_rows) rows = Run{s.large_rows->start + bands[i].row_start, s.large_rows->end + bands[i].row_start};
      lines.push_back({std::move(s.image), bands[i].row_start + s.band.row_start, s.large_cols, rows});
    }
  }

  int line_index = 0;
  for (const auto& line : lines) {
    const int target_h = line.image.height();
    int word_index = 0;
    Box line_box;
    for (const auto& wb : segment_words(line.image, line_index, cfg.words)) {
      const auto wi = word_image(line.image, wb);
      const auto chars = segment_characters(wi.image, cfg.chars);
      if (chars.empty()) continue;
      // Rows of the word in page coordinates; large-font columns map through
      // the row rescale.
      const auto page_rows = [&](int col) {
        const int top = wi.row_offset, bottom = wi.row_offset + wi.image.height() - 1;
        if (line.large_cols && col >= line.large_cols->start && col <= line.large_cols->end) {
          const int src_h = line.large_rows->length();
          const int a = line.large_rows->start + top * src_h / target_h;
          const int b = line.large_rows->start + ((bottom + 1) * src_h + target_h - 1) / target_h - 1;
          return Run{a, std::max(a, b)};
        }
        return Run{line.page_row + top, line.page_row + bottom};
      };
      Box word_box;
      for (std::size_t c = 0; c < chars.size(); ++c) {
        const int x0 = wb.col_start + chars[c].col_start;
        const Run rows = page_rows(x0);
        Box box{x0, rows.start, chars[c].width(), rows.length()};
        box = pad_and_clip(box, 0, page.width(), page.height());
        SegmentRecord r{line_index, word_index, static_cast<int>(c), box,
                        detail::crop_name(line_index, word_index, static_cast<int>(c))};
        res.crops.push_back(crop(page, box));
        m.records.push_back(std::move(r));
        word_box = unite(word_box, box);
      }
      if (dbg.retained) {
        dbg.words.push_back(word_box);
        const auto mt = detect_matra(wi.image, cfg.chars.matra_fraction);
        if (mt.found) {
          const Run rows = page_rows(wb.col_start);
          dbg.matras.push_back({word_box, rows.start + mt.row_start, rows.start + mt.row_end});
        }
      }
      line_box = unite(line_box, word_box);
      ++word_index;
    }
    if (word_index == 0) continue;
    if (dbg.retained) dbg.lines.push_back(line_box);
    ++line_index;
  }
  if (m.records.empty()) {
    detail::finish_empty(m, "empty page");
    res.crops.clear();
    return res;
  }
  m.counts = count_records(m.records);
  return res;
}

// ---------------------------------------------------------------------------
// Overlays

inline constexpr std::array<std::uint8_t, 3> kLineColor{255, 0, 0};
inline constexpr std::array<std::uint8_t, 3> kWordColor{0, 160, 0};
inline constexpr std::array<std::uint8_t, 3> kCharColor{0, 0, 255};
inline constexpr std::array<std::uint8_t, 3> kMatraColor{255, 200, 0};
inline constexpr std::array<std::uint8_t, 3> kCropColor{255, 0, 255};

inline const std::vector<std::string>& overlay_stages() {
  static const std::vector<std::string> stages{"crop", "skew", "dewarp", "binarize", "lines", "words", "chars", "matra"};
  return stages;
}

namespace detail {

inline RgbImage to_rgb(const GrayImage& g) {
  RgbImage out{g.width(), g.height(), {}};
  out.rgb.reserve(g.size() * 3);
  for (auto v : g.data()) out.rgb.insert(out.rgb.end(), {v, v, v});
  return out;
}

inline void put(RgbImage& img, int x, int y, const std::array<std::uint8_t, 3>& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  std::copy(c.begin(), c.end(), img.rgb.begin() + (static_cast<std::size_t>(y) * img.width + x) * 3);
}

inline void draw_rect(RgbImage& img, const Box& b, const std::array<std::uint8_t, 3>& c) {
  for (int x = b.x; x < b.right(); ++x) {
    put(img, x, b.y, c);
    put(img, x, b.bottom() - 1, c);
  }
  for (int y = b.y; y < b.bottom(); ++y) {
    put(img, b.x, y, c);
    put(img, b.right() - 1, y, c);
  }
}

}  // namespace detail

// Renders one stage's intermediate image with its bands and writes
// `overlay_<stage>.png` into out_dir. Returns the written path.
inline std::string emit_overlay(const PageResult& res, const std::string& stage, const std::string& out_dir) {
  const auto& stages = overlay_stages();
  if (std::find(stages.begin(), stages.end(), stage) == stages.end())
    throw ParameterError("emit_overlay: unknown stage '" + stage + "'");
  const auto& d = res.debug;
  if (!d.retained) throw ParameterError("emit_overlay: debug retention was off for this page");
  RgbImage img;
  if (stage == "crop") {
    img = detail::to_rgb(d.original);
    detail::draw_rect(img, res.manifest.crop_report.crop_box, kCropColor);
  } else if (stage == "skew") {
    img = detail::to_rgb(d.deskewed);
  } else if (stage == "dewarp") {
    img = detail::to_rgb(d.dewarped);
  } else if (stage == "binarize") {
    img = detail::to_rgb(d.binary.size() ? render(d.binary) : res.page);
  } else {
    img = detail::to_rgb(res.page);
    if (stage == "lines") {
      for (const auto& b : d.lines) detail::draw_rect(img, b, kLineColor);
    } else if (stage == "words") {
      for (const auto& b : d.words) detail::draw_rect(img, b, kWordColor);
    } else if (stage == "chars") {
      for (const auto& r : res.manifest.records) detail::draw_rect(img, r.box, kCharColor);
    } else {
      for (const auto& mt : d.matras)
        for (int y = mt.row_start; y <= mt.row_end; ++y)
          for (int x = mt.word.x; x < mt.word.right(); ++x) detail::put(img, x, y, kMatraColor);
    }
  }
  std::filesystem::create_directories(out_dir);
  const auto path = (std::filesystem::path(out_dir) / ("overlay_" + stage + ".png")).string();
  write_png(path, img);
  return path;
}

// ---------------------------------------------------------------------------
// File-level entry points

inline PageResult run_page(const std::string& image_path, const PipelineConfig& cfg, const std::string& out_dir) {
  const auto input = read_gray(image_path);
  auto res = process_page(input, cfg, image_path);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());
  if (cfg.write_crops)
    for (std::size_t i = 0; i < res.crops.size(); ++i)
      write_png((std::filesystem::path(out_dir) / res.manifest.records[i].crop_path).string(), res.crops[i]);
  write_text_file((std::filesystem::path(out_dir) / "manifest.json").string(), dump_manifest(res.manifest));
  if (cfg.debug_overlays)
    for (const auto& s : overlay_stages()) emit_overlay(res, s, out_dir);
  return res;
}

inline Manifest run_pipeline(const std::string& image_path, const PipelineConfig& cfg, const std::string& out_dir) {
  return run_page(image_path, cfg, out_dir).manifest;
}

struct BatchFailure {
  std::string path;
  std::string error;
};

struct BatchSummary {
  int pages = 0;  // pages with a manifest
  long long total_records = 0;
  std::vector<BatchFailure> failures;
};

inline nlohmann::json to_json(const BatchSummary& s) {
  auto failures = nlohmann::json::array();
  for (const auto& f : s.failures) failures.push_back({{"path", f.path}, {"error", f.error}});
  return {{"pages", s.pages}, {"total_records", s.total_records}, {"failures", failures}};
}

// Files matching a shell pattern; wildcards are allowed in the file name only.
inline std::vector<std::string> glob_files(const std::string& pattern) {
  const std::filesystem::path p(pattern);
  const auto dir = p.has_parent_path() ? p.parent_path() : std::filesystem::path(".");
  const auto name = p.filename().string();
  std::vector<std::string> out;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    if (::fnmatch(name.c_str(), e.path().filename().c_str(), 0) == 0) out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// One subdirectory per page, named after the file stem; failures are
// recorded and the run continues. Writes summary.json into out_root.
inline BatchSummary batch(const std::string& pattern, const PipelineConfig& cfg, const std::string& out_root) {
  const auto files = glob_files(pattern);
  if (files.empty()) throw ParameterError("batch: no files match '" + pattern + "'");
  std::filesystem::create_directories(out_root);
  BatchSummary summary;
  std::vector<std::string> used;
  for (const auto& f : files) {
    auto sub = std::filesystem::path(f).stem().string();
    if (std::find(used.begin(), used.end(), sub) != used.end()) sub = std::filesystem::path(f).filename().string();
    used.push_back(sub);
    try {
      const auto m = run_pipeline(f, cfg, (std::filesystem::path(out_root) / sub).string());
      ++summary.pages;
      summary.total_records += static_cast<long long>(m.records.size());
    } catch (const std::exception& e) {
      summary.failures.push_back({f, e.what()});
    }
  }
  write_text_file((std::filesystem::path(out_root) / "summary.json").string(), to_json(summary).dump(2) + "\n");
  return summary;
}

}  // namespace bocr
