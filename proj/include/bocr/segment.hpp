#pragma once

// Projection-profile segmentation: lines, multi-font line splitting, words,
// headline (matra) detection and removal, characters.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "bocr/error.hpp"
#include "bocr/image.hpp"
#include "bocr/raster.hpp"

namespace bocr {

struct Run {
  int start = 0;
  int end = 0;  // inclusive
  int length() const { return end - start + 1; }
  friend bool operator==(const Run&, const Run&) = default;
};

// Maximal runs of entries with value > eps.
inline std::vector<Run> non_blank_runs(const std::vector<int>& sums, double eps) {
  std::vector<Run> runs;
  const int n = static_cast<int>(sums.size());
  for (int i = 0; i < n;) {
    if (sums[i] <= eps) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 < n && sums[j + 1] > eps) ++j;
    runs.push_back({i, j});
    i = j + 1;
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Lines

struct LineBand {
  int row_start = 0;
  int row_end = 0;  // inclusive
  std::optional<int> sub_line_of;
  int height() const { return row_end - row_start + 1; }
  friend bool operator==(const LineBand&, const LineBand&) = default;
};

struct LineOptions {
  double blank_fraction = 0.005;  // of page width; a row is blank at or below max(1, this)
  int min_line_height = 8;
};

inline double line_blank_eps(int width, const LineOptions& opt) { return std::max(1.0, opt.blank_fraction * width); }

inline std::vector<LineBand> segment_lines(const BinaryImage& page, const LineOptions& opt = {}) {
  if (page.width() <= 0 || page.height() <= 0) throw DimensionError("segment_lines: empty image");
  std::vector<LineBand> bands;
  for (const auto& r : non_blank_runs(project(page, Axis::Row).sums, line_blank_eps(page.width(), opt)))
    if (r.length() >= opt.min_line_height) bands.push_back({r.start, r.end, std::nullopt});
  if (bands.empty()) throw NoTextError("segment_lines: no text lines");
  return bands;
}

inline BinaryImage band_image(const BinaryImage& page, const LineBand& b) {
  return crop(page, Box{0, b.row_start, page.width(), b.height()});
}

// ---------------------------------------------------------------------------
// Multi-font lines

// One output line of a split band. Columns [large_cols.start, large_cols.end]
// came from rows large_rows of the band (rescaled); all other columns come
// from rows band.row_start..row_end of the band.
struct SubLine {
  BinaryImage image;
  LineBand band;  // rows relative to the input band image
  std::optional<Run> large_cols;
  std::optional<Run> large_rows;
};

struct MultiFontOptions {
  double height_factor = 1.6;
  LineOptions lines;
};

struct MultiFontSplit {
  std::vector<SubLine> lines;
  bool warning = false;  // oversized band that could not be split
};

namespace detail {

inline std::vector<LineBand> try_lines(const BinaryImage& img, const LineOptions& opt) {
  try {
    return segment_lines(img, opt);
  } catch (const NoTextError&) {
    return {};
  }
}

}  // namespace detail

// A band much taller than the page average is assumed to hold a large-font
// word next to several small-font lines. It is split at a blank column gap;
// the large-font side is rescaled to the small line height and attached to
// the first small line. `mean_band_height` is the page average.
inline MultiFontSplit split_multifont_line(const BinaryImage& band, double mean_band_height, int parent,
                                           const MultiFontOptions& opt = {}) {
  MultiFontSplit out;
  const auto whole = [&] {
    out.lines.push_back({band, LineBand{0, band.height() - 1, std::nullopt}, std::nullopt, std::nullopt});
  };
  if (band.height() <= opt.height_factor * mean_band_height) {
    whole();
    return out;
  }
  const auto cols = project(band, Axis::Column).sums;
  const auto ink = non_blank_runs(cols, 0);
  if (ink.size() < 2) {
    whole();
    out.warning = true;
    return out;
  }
  std::vector<Run> gaps;
  for (std::size_t i = 0; i + 1 < ink.size(); ++i) gaps.push_back({ink[i].end + 1, ink[i + 1].start - 1});
  std::stable_sort(gaps.begin(), gaps.end(), [](const Run& a, const Run& b) { return a.length() > b.length(); });

  const int first = ink.front().start, last = ink.back().end;
  for (const auto& g : gaps) {
    const Run left{first, g.start - 1}, right{g.end + 1, last};
    const auto lines_of = [&](const Run& c) {
      return detail::try_lines(crop(band, Box{c.start, 0, c.length(), band.height()}), opt.lines);
    };
    const auto ll = lines_of(left), rl = lines_of(right);
    if (ll.empty() || rl.empty() || ll.size() == rl.size()) continue;
    const bool left_large = ll.size() < rl.size();
    const Run large_cols = left_large ? left : right;
    const auto& large = left_large ? ll : rl;
    const auto& small = left_large ? rl : ll;
    const int target_h = small.front().height();
    for (std::size_t i = 0; i < small.size(); ++i) {
      SubLine sub;
      sub.band = {small[i].row_start, small[i].row_end, parent};
      sub.image = BinaryImage(band.width(), target_h);
      // Small-font columns copy rows of this small line, rescaled to the common height.
      const auto rows = scale_rows_nearest(crop(band, Box{0, small[i].row_start, band.width(), small[i].height()}), target_h);
      for (int y = 0; y < target_h; ++y)
        for (int x = 0; x < band.width(); ++x)
          if (x < large_cols.start || x > large_cols.end) sub.image(x, y) = rows(x, y);
      // Large lines beyond the small line count attach to the last small line.
      for (std::size_t j = 0; j < large.size(); ++j) {
        const std::size_t host = std::min(j, small.size() - 1);
        if (host != i) continue;
        const auto big = scale_rows_nearest(crop(band, Box{0, large[j].row_start, band.width(), large[j].height()}), target_h);
        for (int y = 0; y < target_h; ++y)
          for (int x = large_cols.start; x <= large_cols.end; ++x) sub.image(x, y) = std::max(sub.image(x, y), big(x, y));
        if (!sub.large_cols) {
          sub.large_cols = large_cols;
          sub.large_rows = Run{large[j].row_start, large[j].row_end};
        }
      }
      out.lines.push_back(std::move(sub));
    }
    return out;
  }
  whole();
  out.warning = true;
  return out;
}

// ---------------------------------------------------------------------------
// Words

struct WordBand {
  int line_id = 0;
  int col_start = 0;
  int col_end = 0;  // inclusive
  int width() const { return col_end - col_start + 1; }
  friend bool operator==(const WordBand&, const WordBand&) = default;
};

struct WordOptions {
  int blank_eps = 0;
  double gap_factor = 0.4;  // minimum word gap as a fraction of the x-height
};

// Most frequent vertical ink extent over non-blank columns; larger wins ties.
inline int estimate_x_height(const BinaryImage& line) {
  std::map<int, int> hist;
  for (int x = 0; x < line.width(); ++x) {
    int top = -1, bottom = -1;
    for (int y = 0; y < line.height(); ++y) {
      if (line(x, y)) {
        if (top < 0) top = y;
        bottom = y;
      }
    }
    if (top >= 0) ++hist[bottom - top + 1];
  }
  int best = 0, best_n = 0;
  for (const auto& [h, n] : hist)
    if (n >= best_n) {
      best = h;
      best_n = n;
    }
  return best;
}

inline std::vector<WordBand> segment_words(const BinaryImage& line, int line_id = 0, const WordOptions& opt = {}) {
  const auto runs = non_blank_runs(project(line, Axis::Column).sums, opt.blank_eps);
  std::vector<WordBand> words;
  if (runs.empty()) return words;
  const double min_gap = opt.gap_factor * estimate_x_height(line);
  WordBand cur{line_id, runs.front().start, runs.front().end};
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].start - cur.col_end - 1 >= min_gap) {
      words.push_back(cur);
      cur = {line_id, runs[i].start, runs[i].end};
    } else {
      cur.col_end = runs[i].end;
    }
  }
  words.push_back(cur);
  return words;
}

struct WordImage {
  BinaryImage image;
  int row_offset = 0;  // top row of the word within the line image
};

// Word columns of a line, tightened vertically to the ink rows.
inline WordImage word_image(const BinaryImage& line, const WordBand& w) {
  const auto cols = crop(line, Box{w.col_start, 0, w.width(), line.height()});
  const auto rows = non_blank_runs(project(cols, Axis::Row).sums, 0);
  if (rows.empty()) return {cols, 0};
  const int top = rows.front().start, bottom = rows.back().end;
  return {crop(cols, Box{0, top, cols.width(), bottom - top + 1}), top};
}

// ---------------------------------------------------------------------------
// Matra

struct MatraInfo {
  bool found = false;
  int row_start = 0;
  int row_end = 0;  // inclusive
  friend bool operator==(const MatraInfo&, const MatraInfo&) = default;
};

// The headline is the longest run of rows in the upper half whose ink covers
// more than `fraction` of the word width. Topmost run wins ties.
inline MatraInfo detect_matra(const BinaryImage& word, double fraction = 0.6) {
  MatraInfo best;
  const auto rows = project(word, Axis::Row).sums;
  std::vector<int> upper(rows.begin(), rows.begin() + word.height() / 2);
  for (const auto& r : non_blank_runs(upper, fraction * word.width())) {
    if (!best.found || r.length() > best.row_end - best.row_start + 1) best = {true, r.start, r.end};
  }
  return best;
}

inline BinaryImage remove_matra(const BinaryImage& word, const MatraInfo& m) {
  if (!m.found) throw ParameterError("remove_matra: no matra to remove");
  BinaryImage out = word;
  for (int y = std::max(0, m.row_start); y <= std::min(word.height() - 1, m.row_end); ++y)
    std::fill(out.row(y).begin(), out.row(y).end(), std::uint8_t{0});
  return out;
}

// ---------------------------------------------------------------------------
// Characters

struct CharBand {
  int col_start = 0;
  int col_end = 0;  // inclusive
  int width() const { return col_end - col_start + 1; }
  friend bool operator==(const CharBand&, const CharBand&) = default;
};

struct CharOptions {
  int blank_eps = 0;
  int min_char_ink = 4;
  double matra_fraction = 0.6;
  // After a matra removal, retry with eps = max(1, escalate_fraction * height)
  // when some band is wider than wide_ratio * height; a partly removed matra
  // leaves such bands.
  double escalate_fraction = 0.02;
  double wide_ratio = 1.0;
};

inline std::vector<CharBand> segment_characters(const BinaryImage& word, const CharOptions& opt = {}) {
  const auto m = detect_matra(word, opt.matra_fraction);
  const auto body = m.found ? remove_matra(word, m) : word;
  const auto cols = project(body, Axis::Column).sums;
  const auto bands_at = [&](double eps) {
    std::vector<CharBand> out;
    for (const auto& r : non_blank_runs(cols, eps)) {
      long long ink = 0;
      for (int x = r.start; x <= r.end; ++x) ink += cols[x];
      if (ink >= opt.min_char_ink) out.push_back({r.start, r.end});
    }
    return out;
  };
  auto bands = bands_at(opt.blank_eps);
  const bool too_wide = std::any_of(bands.begin(), bands.end(),
                                    [&](const CharBand& b) { return b.width() > opt.wide_ratio * word.height(); });
  if (m.found && too_wide) {
    const double eps = std::max(1.0, std::round(opt.escalate_fraction * word.height()));
    if (eps > opt.blank_eps) {
      auto retry = bands_at(eps);
      if (retry.size() > 1) bands = std::move(retry);
    }
  }
  return bands;
}

}  // namespace bocr
