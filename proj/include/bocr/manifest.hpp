#pragma once

// Per-page pipeline report and its JSON form.

#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "bocr/error.hpp"
#include "bocr/image.hpp"
#include "bocr/preprocess.hpp"
#include "bocr/synth.hpp"
#include "json.hpp"

namespace bocr {

struct SegmentRecord {
  int line_index = 0;
  int word_index = 0;
  int char_index = 0;
  Box box;  // preprocessed-page coordinates
  std::string crop_path;
  friend bool operator==(const SegmentRecord&, const SegmentRecord&) = default;
};

inline bool record_order(const SegmentRecord& a, const SegmentRecord& b) {
  return std::tie(a.line_index, a.word_index, a.char_index) < std::tie(b.line_index, b.word_index, b.char_index);
}

struct Dims {
  int width = 0;
  int height = 0;
  friend bool operator==(const Dims&, const Dims&) = default;
};

struct Counts {
  int lines = 0;
  int words = 0;
  int chars = 0;
  friend bool operator==(const Counts&, const Counts&) = default;
};

struct Manifest {
  std::string source_path;
  Dims image_dims_before;
  Dims image_dims_after;
  CropReport crop_report;
  SkewReport skew_report;
  double dewarp_residual = 0;
  Counts counts;
  std::vector<SegmentRecord> records;  // sorted by (line, word, char)
  nlohmann::json config_snapshot = nlohmann::json::object();
  std::vector<std::string> warnings;
};

// Counts derived from the records: distinct lines, distinct (line, word), records.
inline Counts count_records(const std::vector<SegmentRecord>& records) {
  Counts c;
  int last_line = -1, last_word = -1;
  for (const auto& r : records) {
    if (r.line_index != last_line) {
      ++c.lines;
      ++c.words;
    } else if (r.word_index != last_word) {
      ++c.words;
    }
    last_line = r.line_index;
    last_word = r.word_index;
    ++c.chars;
  }
  return c;
}

inline void to_json(nlohmann::json& j, const Dims& d) { j = {{"width", d.width}, {"height", d.height}}; }
inline void from_json(const nlohmann::json& j, Dims& d) { d = {j.at("width").get<int>(), j.at("height").get<int>()}; }

inline void to_json(nlohmann::json& j, const Counts& c) { j = {{"lines", c.lines}, {"words", c.words}, {"chars", c.chars}}; }
inline void from_json(const nlohmann::json& j, Counts& c) {
  c = {j.at("lines").get<int>(), j.at("words").get<int>(), j.at("chars").get<int>()};
}

inline void to_json(nlohmann::json& j, const CropReport& r) {
  j = {{"crop_box", r.crop_box}, {"edge_count_before", r.edge_count_before}, {"edge_count_after", r.edge_count_after}};
}
inline void from_json(const nlohmann::json& j, CropReport& r) {
  r.crop_box = j.at("crop_box").get<Box>();
  r.edge_count_before = j.at("edge_count_before").get<long long>();
  r.edge_count_after = j.at("edge_count_after").get<long long>();
}

inline void to_json(nlohmann::json& j, const SkewReport& r) {
  auto scores = nlohmann::json::array();
  for (const auto& c : r.scores) scores.push_back({{"angle", c.angle}, {"score", c.score}});
  j = {{"best_angle", r.best_angle}, {"peak_score", r.peak_score}, {"scores", scores}};
}
inline void from_json(const nlohmann::json& j, SkewReport& r) {
  r.best_angle = j.at("best_angle").get<double>();
  r.peak_score = j.at("peak_score").get<double>();
  r.scores.clear();
  for (const auto& s : j.at("scores")) r.scores.push_back({s.at("angle").get<double>(), s.at("score").get<double>()});
}

inline void to_json(nlohmann::json& j, const SegmentRecord& r) {
  j = {{"line_index", r.line_index}, {"word_index", r.word_index}, {"char_index", r.char_index},
       {"box", r.box}, {"crop_path", r.crop_path}};
}
inline void from_json(const nlohmann::json& j, SegmentRecord& r) {
  r.line_index = j.at("line_index").get<int>();
  r.word_index = j.at("word_index").get<int>();
  r.char_index = j.at("char_index").get<int>();
  r.box = j.at("box").get<Box>();
  r.crop_path = j.at("crop_path").get<std::string>();
}

inline void to_json(nlohmann::json& j, const Manifest& m) {
  j = {{"source_path", m.source_path},
       {"image_dims_before", m.image_dims_before},
       {"image_dims_after", m.image_dims_after},
       {"crop_report", m.crop_report},
       {"skew_report", m.skew_report},
       {"dewarp_residual", m.dewarp_residual},
       {"counts", m.counts},
       {"records", m.records},
       {"config_snapshot", m.config_snapshot},
       {"warnings", m.warnings}};
}
inline void from_json(const nlohmann::json& j, Manifest& m) {
  m.source_path = j.at("source_path").get<std::string>();
  m.image_dims_before = j.at("image_dims_before").get<Dims>();
  m.image_dims_after = j.at("image_dims_after").get<Dims>();
  m.crop_report = j.at("crop_report").get<CropReport>();
  m.skew_report = j.at("skew_report").get<SkewReport>();
  m.dewarp_residual = j.at("dewarp_residual").get<double>();
  m.counts = j.at("counts").get<Counts>();
  m.records = j.at("records").get<std::vector<SegmentRecord>>();
  m.config_snapshot = j.at("config_snapshot");
  m.warnings = j.at("warnings").get<std::vector<std::string>>();
}

inline std::string dump_manifest(const Manifest& m) { return nlohmann::json(m).dump(2) + "\n"; }

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid JSON in '" + path + "': " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write '" + path + "'");
}

inline Manifest load_manifest(const std::string& path) {
  try {
    return read_json_file(path).get<Manifest>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest '" + path + "': " + e.what());
  }
}

}  // namespace bocr
