#pragma once

// Scoring of pipeline output against generator ground truth, corpus runs and
// the stage-exclusion table.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "bocr/config.hpp"
#include "bocr/manifest.hpp"
#include "bocr/pipeline.hpp"
#include "bocr/synth.hpp"
#include "json.hpp"

namespace bocr {

struct LevelScore {
  int n_truth = 0;
  int n_predicted = 0;
  int n_matched = 0;
  double accuracy = 0;
  int over_segmented = 0;  // unmatched predictions
};

struct ScoreReport {
  LevelScore line;
  LevelScore word;
  LevelScore chr;
  double iou_threshold = 0.7;
  int shift_y = 0;  // predicted minus truth, rows
  std::vector<std::string> warnings;
};

struct Interval {
  int start = 0;
  int end = 0;  // exclusive
};

inline double interval_iou(const Interval& a, const Interval& b) {
  const int inter = std::max(0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const int uni = (a.end - a.start) + (b.end - b.start) - inter;
  return uni > 0 ? static_cast<double>(inter) / uni : 0.0;
}

// Greedy one-to-one matching by descending IoU; returns (truth, pred) pairs.
inline std::vector<std::pair<int, int>> match_intervals(const std::vector<Interval>& truth,
                                                         const std::vector<Interval>& pred, double threshold) {
  std::vector<std::tuple<double, int, int>> cand;
  for (int i = 0; i < static_cast<int>(truth.size()); ++i)
    for (int j = 0; j < static_cast<int>(pred.size()); ++j)
      if (const double v = interval_iou(truth[i], pred[j]); v >= threshold) cand.emplace_back(v, i, j);
  std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
  });
  std::vector<char> tu(truth.size(), 0), pu(pred.size(), 0);
  std::vector<std::pair<int, int>> out;
  for (const auto& [v, i, j] : cand) {
    if (tu[i] || pu[j]) continue;
    tu[i] = pu[j] = 1;
    out.emplace_back(i, j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

struct UnitTree {
  struct Word {
    Interval cols;
    std::vector<Interval> chars;
  };
  struct Line {
    Interval rows;
    std::vector<Word> words;
  };
  std::vector<Line> lines;
};

struct Unit {
  int line, word, chr;
  Box box;
};

inline UnitTree build_tree(std::vector<Unit> units) {
  std::sort(units.begin(), units.end(),
            [](const Unit& a, const Unit& b) { return std::tie(a.line, a.word, a.chr) < std::tie(b.line, b.word, b.chr); });
  UnitTree t;
  int cur_line = -1, cur_word = -1;
  for (const auto& u : units) {
    if (u.line != cur_line) {
      t.lines.push_back({{u.box.y, u.box.bottom()}, {}});
      cur_line = u.line;
      cur_word = -1;
    }
    auto& line = t.lines.back();
    line.rows.start = std::min(line.rows.start, u.box.y);
    line.rows.end = std::max(line.rows.end, u.box.bottom());
    if (u.word != cur_word) {
      line.words.push_back({{u.box.x, u.box.right()}, {}});
      cur_word = u.word;
    }
    auto& word = line.words.back();
    word.cols.start = std::min(word.cols.start, u.box.x);
    word.cols.end = std::max(word.cols.end, u.box.right());
    word.chars.push_back({u.box.x, u.box.right()});
  }
  return t;
}

inline std::vector<Interval> shifted(std::vector<Interval> v, int d) {
  for (auto& i : v) {
    i.start += d;
    i.end += d;
  }
  return v;
}

inline std::vector<Interval> line_rows(const UnitTree& t) {
  std::vector<Interval> out;
  for (const auto& l : t.lines) out.push_back(l.rows);
  return out;
}

inline std::vector<Interval> word_cols(const UnitTree::Line& l) {
  std::vector<Interval> out;
  for (const auto& w : l.words) out.push_back(w.cols);
  return out;
}

// Among candidate offsets, the one with the most matches; ties go to the
// smallest magnitude, then the smaller value.
template <class Count>
int best_offset(std::vector<int> candidates, Count&& count) {
  candidates.push_back(0);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::stable_sort(candidates.begin(), candidates.end(), [](int a, int b) { return std::abs(a) < std::abs(b); });
  int best = 0, best_n = -1;
  for (int d : candidates)
    if (const int n = count(d); n > best_n) {
      best = d;
      best_n = n;
    }
  return best;
}

inline void finish(LevelScore& s, const char* level, std::vector<std::string>& warnings) {
  s.over_segmented = s.n_predicted - s.n_matched;
  if (s.n_truth == 0) {
    s.accuracy = 1.0;
    warnings.push_back(std::string("no truth ") + level + "s; accuracy reported as 1.0");
  } else {
    s.accuracy = static_cast<double>(s.n_matched) / s.n_truth;
  }
}

}  // namespace detail

// Matches predicted records against canonical truth boxes. Predictions live
// in preprocessed-page coordinates, so lines are registered with the global
// row shift that maximizes line matches. Within a matched line, words use the
// column shift maximizing word matches on that line; within a matched word,
// chars are compared relative to the word's start column.
inline ScoreReport score(const Manifest& manifest, const GroundTruth& truth, double iou_threshold = 0.7) {
  ScoreReport rep;
  rep.iou_threshold = iou_threshold;
  std::vector<detail::Unit> tu, pu;
  for (const auto& c : truth.chars) tu.push_back({c.line, c.word, c.chr, c.box});
  for (const auto& r : manifest.records) pu.push_back({r.line_index, r.word_index, r.char_index, r.box});
  const auto t = detail::build_tree(std::move(tu));
  const auto p = detail::build_tree(std::move(pu));

  const auto trows = detail::line_rows(t), prows = detail::line_rows(p);
  std::vector<int> dy_cand;
  for (const auto& a : trows)
    for (const auto& b : prows) dy_cand.push_back(b.start - a.start);
  rep.shift_y = detail::best_offset(dy_cand, [&](int d) {
    return static_cast<int>(match_intervals(detail::shifted(trows, d), prows, iou_threshold).size());
  });
  const auto line_pairs = match_intervals(detail::shifted(trows, rep.shift_y), prows, iou_threshold);

  for (const auto& l : t.lines) {
    ++rep.line.n_truth;
    for (const auto& w : l.words) {
      ++rep.word.n_truth;
      rep.chr.n_truth += static_cast<int>(w.chars.size());
    }
  }
  for (const auto& l : p.lines) {
    ++rep.line.n_predicted;
    for (const auto& w : l.words) {
      ++rep.word.n_predicted;
      rep.chr.n_predicted += static_cast<int>(w.chars.size());
    }
  }
  rep.line.n_matched = static_cast<int>(line_pairs.size());
  for (const auto& [i, j] : line_pairs) {
    const auto tw = detail::word_cols(t.lines[i]), pw = detail::word_cols(p.lines[j]);
    std::vector<int> dx_cand;
    for (const auto& a : tw)
      for (const auto& b : pw) dx_cand.push_back(b.start - a.start);
    const int dx = detail::best_offset(dx_cand, [&](int d) {
      return static_cast<int>(match_intervals(detail::shifted(tw, d), pw, iou_threshold).size());
    });
    const auto wp = match_intervals(detail::shifted(tw, dx), pw, iou_threshold);
    rep.word.n_matched += static_cast<int>(wp.size());
    for (const auto& [a, b] : wp) {
      const auto& tword = t.lines[i].words[a];
      const auto& pword = p.lines[j].words[b];
      rep.chr.n_matched += static_cast<int>(
          match_intervals(detail::shifted(tword.chars, pword.cols.start - tword.cols.start), pword.chars, iou_threshold)
              .size());
    }
  }
  detail::finish(rep.line, "line", rep.warnings);
  detail::finish(rep.word, "word", rep.warnings);
  detail::finish(rep.chr, "char", rep.warnings);
  return rep;
}

inline nlohmann::json to_json(const LevelScore& s) {
  return {{"n_truth", s.n_truth}, {"n_predicted", s.n_predicted}, {"n_matched", s.n_matched},
          {"accuracy", s.accuracy}, {"over_segmented", s.over_segmented}};
}

inline nlohmann::json to_json(const ScoreReport& r) {
  return {{"line", to_json(r.line)},         {"word", to_json(r.word)},       {"char", to_json(r.chr)},
          {"iou_threshold", r.iou_threshold}, {"shift_y", r.shift_y},
          {"warnings", r.warnings}};
}

// ---------------------------------------------------------------------------
// Corpus runs

struct CorpusAccuracy {
  double line = 0;
  double word = 0;
  double chr = 0;
  int pages = 0;
  int failures = 0;
};

// Mean per-page accuracies; a page whose pipeline run throws scores zero.
inline CorpusAccuracy evaluate_corpus(const std::vector<PageSpec>& corpus, const PipelineConfig& cfg) {
  CorpusAccuracy acc;
  for (const auto& spec : corpus) {
    const auto page = generate(spec);
    ++acc.pages;
    try {
      const auto rep = score(process_page(page.image, cfg).manifest, page.truth);
      acc.line += rep.line.accuracy;
      acc.word += rep.word.accuracy;
      acc.chr += rep.chr.accuracy;
    } catch (const Error&) {
      ++acc.failures;
    }
  }
  if (acc.pages) {
    acc.line /= acc.pages;
    acc.word /= acc.pages;
    acc.chr /= acc.pages;
  }
  return acc;
}

struct AblationRow {
  std::string excluded_step;  // "none" for the all-enabled row
  CorpusAccuracy accuracy;
};

inline const std::vector<std::string>& ablation_steps() {
  static const std::vector<std::string> steps{"crop", "skew", "dewarp", "denoise", "multifont"};
  return steps;
}

inline std::vector<AblationRow> ablation(const std::vector<PageSpec>& corpus, const PipelineConfig& base) {
  if (corpus.empty()) throw ParameterError("ablation: empty corpus");
  PipelineConfig cfg = base;
  cfg.write_crops = false;
  cfg.debug_overlays = false;
  std::vector<AblationRow> rows{{"none", evaluate_corpus(corpus, cfg)}};
  for (const auto& step : ablation_steps()) {
    PipelineConfig c = cfg;
    disable_stage(c, step);
    rows.push_back({step, evaluate_corpus(corpus, c)});
  }
  return rows;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "excluded_step,line_acc,word_acc,char_acc\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f\n", r.excluded_step.c_str(), r.accuracy.line, r.accuracy.word,
                  r.accuracy.chr);
    out += buf;
  }
  return out;
}

}  // namespace bocr
