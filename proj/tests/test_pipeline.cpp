#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "bocr/config.hpp"
#include "bocr/eval.hpp"
#include "bocr/image_io.hpp"
#include "bocr/manifest.hpp"
#include "bocr/pipeline.hpp"
#include "bocr/synth.hpp"
#include "support/schema_check.hpp"

using namespace bocr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("bocr_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

PageSpec page_spec(std::uint64_t seed, int lines = 3) {
  PageSpec s;
  s.width = 700;
  s.height = 140 + lines * 46;
  s.margin_px = 60;
  s.lines = lines;
  s.seed = seed;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path write_page(const fs::path& dir, const std::string& name, const GrayImage& img) {
  const auto p = dir / name;
  write_png(p.string(), img);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, DefaultsAreValidAndRoundTrip) {
  const PipelineConfig c;
  EXPECT_NO_THROW(validate(c));
  const auto j = to_json(c);
  EXPECT_EQ(to_json(config_from_json(j)), j);
  EXPECT_EQ(j.at("skew_step"), 0.25);
  EXPECT_EQ(j.at("binarize_window"), 31);
  EXPECT_EQ(j.at("enable_crop"), true);
}

TEST(Config, PartialFileKeepsDefaults) {
  const auto c = config_from_json({{"skew_step", 0.5}, {"enable_dewarp", false}});
  EXPECT_EQ(c.skew.step_deg, 0.5);
  EXPECT_FALSE(c.enable_dewarp);
  EXPECT_EQ(c.binarize.offset, 15);
}

TEST(Config, OutOfRangeNamesField) {
  try {
    config_from_json({{"binarize_window", 30}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "binarize_window");
  }
  try {
    config_from_json({{"matra_fraction", 1.5}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "matra_fraction");
  }
  try {
    config_from_json({{"canny_low", 200.0}, {"canny_high", 100.0}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "canny_low");
  }
}

TEST(Config, WrongTypeAndUnknownKeyRejected) {
  EXPECT_THROW(config_from_json({{"enable_crop", 1}}), ConfigError);
  EXPECT_THROW(config_from_json({{"min_line_height", 2.5}}), ConfigError);
  EXPECT_THROW(config_from_json({{"no_such_key", 1}}), ConfigError);
  EXPECT_THROW(config_from_json({{"skew_scoring", "best"}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::array()), ConfigError);
}

TEST(Config, FileErrors) {
  const auto dir = scratch("config");
  EXPECT_THROW(load_config((dir / "missing.json").string()), IoError);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(load_config((dir / "bad.json").string()), ConfigError);
  std::ofstream(dir / "good.json") << R"({"skew_scoring": "peak_difference", "word_gap_factor": 0.5})";
  const auto c = load_config((dir / "good.json").string());
  EXPECT_EQ(c.skew.scoring, SkewScoring::PeakDifference);
  EXPECT_EQ(c.words.gap_factor, 0.5);
}

TEST(Config, DisableStage) {
  PipelineConfig c;
  for (const auto& s : ablation_steps()) disable_stage(c, s);
  EXPECT_FALSE(c.enable_crop || c.enable_skew || c.enable_dewarp || c.enable_denoise || c.enable_multifont);
  EXPECT_THROW(disable_stage(c, "binarize"), ConfigError);
}

// ---------------------------------------------------------------------------
// Manifest

TEST(Manifest, RoundTripIsLossless) {
  const auto page = generate(page_spec(300));
  PipelineConfig cfg;
  cfg.enable_dewarp = false;
  const auto m = process_page(page.image, cfg, "in.png").manifest;
  const auto text = dump_manifest(m);
  const auto back = nlohmann::json::parse(text).get<Manifest>();
  EXPECT_EQ(dump_manifest(back), text);
  EXPECT_EQ(back.records, m.records);
  EXPECT_EQ(back.counts, m.counts);
}

TEST(Manifest, KeysAreSnakeCaseFields) {
  const auto j = nlohmann::json(Manifest{});
  const std::set<std::string> keys{"source_path", "image_dims_before", "image_dims_after", "crop_report", "skew_report",
                                   "dewarp_residual", "counts", "records", "config_snapshot", "warnings"};
  std::set<std::string> got;
  for (const auto& [k, v] : j.items()) got.insert(k);
  EXPECT_EQ(got, keys);
}

TEST(Manifest, CountsFollowRecords) {
  std::vector<SegmentRecord> r{{0, 0, 0, {}, ""}, {0, 0, 1, {}, ""}, {0, 1, 0, {}, ""}, {1, 0, 0, {}, ""}};
  EXPECT_EQ(count_records(r), (Counts{2, 3, 4}));
  EXPECT_EQ(count_records({}), (Counts{0, 0, 0}));
}

TEST(Manifest, MalformedFileIsIoError) {
  const auto dir = scratch("manifest");
  std::ofstream(dir / "m.json") << R"({"records": 3})";
  EXPECT_THROW(load_manifest((dir / "m.json").string()), IoError);
}

TEST(Manifest, SchemaAcceptsPipelineOutputAndRejectsDrift) {
  const auto schema = read_json_file(BOCR_SCHEMA_PATH);
  const auto page = generate(page_spec(305));
  auto j = nlohmann::json(process_page(page.image, PipelineConfig{}).manifest);
  EXPECT_TRUE(schema_check::validate(schema, j).empty());
  auto extra = j;
  extra["unexpected"] = 1;
  EXPECT_FALSE(schema_check::validate(schema, extra).empty());
  auto missing = j;
  missing.erase("counts");
  EXPECT_FALSE(schema_check::validate(schema, missing).empty());
  auto wrong = j;
  wrong["counts"]["lines"] = "three";
  EXPECT_FALSE(schema_check::validate(schema, wrong).empty());
}

// ---------------------------------------------------------------------------
// process_page / run_pipeline

TEST(Pipeline, IdealPageRecordsMatchTruth) {
  const auto page = generate(page_spec(301, 4));
  const auto res = process_page(page.image, PipelineConfig{});
  const auto& m = res.manifest;
  EXPECT_EQ(m.records.size(), page.truth.chars.size());
  EXPECT_EQ(m.counts, count_records(m.records));
  EXPECT_TRUE(std::is_sorted(m.records.begin(), m.records.end(), record_order));
  const auto rep = score(m, page.truth);
  EXPECT_EQ(rep.line.accuracy, 1.0);
  EXPECT_EQ(rep.word.accuracy, 1.0);
  EXPECT_EQ(rep.chr.accuracy, 1.0);
}

TEST(Pipeline, IndicesDenseAndUnique) {
  const auto m = process_page(generate(page_spec(302, 4)).image, PipelineConfig{}).manifest;
  std::set<std::tuple<int, int, int>> seen;
  int line = -1, word = -1, chr = -1;
  for (const auto& r : m.records) {
    EXPECT_TRUE(seen.insert({r.line_index, r.word_index, r.char_index}).second);
    if (r.line_index != line) {
      EXPECT_EQ(r.line_index, line + 1);
      EXPECT_EQ(r.word_index, 0);
      EXPECT_EQ(r.char_index, 0);
    } else if (r.word_index != word) {
      EXPECT_EQ(r.word_index, word + 1);
      EXPECT_EQ(r.char_index, 0);
    } else {
      EXPECT_EQ(r.char_index, chr + 1);
    }
    line = r.line_index;
    word = r.word_index;
    chr = r.char_index;
  }
}

TEST(Pipeline, BlankPageIsEmptyNotFailure) {
  const auto dir = scratch("blank");
  const auto in = write_page(dir, "blank.png", GrayImage(300, 300, 255));
  const auto m = run_pipeline(in.string(), PipelineConfig{}, (dir / "out").string());
  EXPECT_TRUE(m.records.empty());
  EXPECT_EQ(m.counts, (Counts{0, 0, 0}));
  EXPECT_NE(std::find(m.warnings.begin(), m.warnings.end(), "empty page"), m.warnings.end());
  EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
}

TEST(Pipeline, UnreadableInputIsIoError) {
  const auto dir = scratch("unreadable");
  EXPECT_THROW(run_pipeline((dir / "nope.png").string(), PipelineConfig{}, (dir / "out").string()), IoError);
  std::ofstream(dir / "junk.png") << "definitely not an image";
  EXPECT_THROW(run_pipeline((dir / "junk.png").string(), PipelineConfig{}, (dir / "out").string()), IoError);
}

TEST(Pipeline, CropFilesMatchRecords) {
  const auto dir = scratch("crops");
  const auto in = write_page(dir, "page.png", generate(page_spec(303)).image);
  const auto out = dir / "out";
  const auto m = run_pipeline(in.string(), PipelineConfig{}, out.string());
  ASSERT_FALSE(m.records.empty());
  int pngs = 0;
  for (const auto& e : fs::directory_iterator(out)) pngs += e.path().extension() == ".png";
  EXPECT_EQ(pngs, static_cast<int>(m.records.size()));
  for (const auto& r : m.records) {
    EXPECT_EQ(r.crop_path, "L" + std::to_string(r.line_index) + "_W" + std::to_string(r.word_index) + "_C" +
                               std::to_string(r.char_index) + ".png");
    const auto crop_img = read_gray((out / r.crop_path).string());
    EXPECT_EQ(crop_img.width(), r.box.w);
    EXPECT_EQ(crop_img.height(), r.box.h);
  }
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

TEST(Pipeline, DeterministicManifestBytes) {
  const auto dir = scratch("determinism");
  PageSpec s = page_spec(304);
  s.defects.skew_deg = 2;
  s.defects.noise_rate = 0.01;
  const auto in = write_page(dir, "page.png", generate(s).image);
  PipelineConfig cfg;
  cfg.write_crops = false;
  run_pipeline(in.string(), cfg, (dir / "a").string());
  run_pipeline(in.string(), cfg, (dir / "b").string());
  const auto a = slurp(dir / "a" / "manifest.json"), b = slurp(dir / "b" / "manifest.json");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
}

TEST(Pipeline, EveryStageCanBeDisabled) {
  PageSpec s = page_spec(305, 4);
  s.defects = {2.0, 6.0, 0.01, 3, std::nullopt, 0};
  const auto page = generate(s);
  for (const auto& step : ablation_steps()) {
    PipelineConfig cfg;
    disable_stage(cfg, step);
    EXPECT_NO_THROW(process_page(page.image, cfg)) << step;
  }
  PipelineConfig all_off;
  for (const auto& step : ablation_steps()) disable_stage(all_off, step);
  EXPECT_NO_THROW(process_page(page.image, all_off));
  PipelineConfig skew_first;
  skew_first.crop_before_skew = false;
  const auto rep = score(process_page(page.image, skew_first).manifest, page.truth);
  EXPECT_GE(rep.line.accuracy, 0.75);
}

TEST(Pipeline, MultiFontLineSplitsIntoSmallLines) {
  PageSpec s = page_spec(306, 6);
  s.defects.multifont = MultiFontDefect{2.0, 1};
  const auto page = generate(s);
  const auto with = score(process_page(page.image, PipelineConfig{}).manifest, page.truth);
  PipelineConfig off;
  off.enable_multifont = false;
  const auto without = score(process_page(page.image, off).manifest, page.truth);
  EXPECT_EQ(with.line.accuracy, 1.0);
  EXPECT_LT(without.line.accuracy, with.line.accuracy);
}

TEST(Pipeline, CropDisabledHurtsBorderedPage) {
  PageSpec s = page_spec(307, 5);
  s.defects.border_px = 4;
  s.defects.skew_deg = 3;
  const auto page = generate(s);
  const auto with = score(process_page(page.image, PipelineConfig{}).manifest, page.truth);
  PipelineConfig off;
  off.enable_crop = false;
  const auto without = score(process_page(page.image, off).manifest, page.truth);
  EXPECT_LT(without.line.accuracy, with.line.accuracy);
}

// ---------------------------------------------------------------------------
// Overlays

TEST(Overlay, LinesDrawOneRectanglePerLine) {
  const auto dir = scratch("overlay");
  PipelineConfig cfg;
  cfg.debug_overlays = true;
  const auto res = process_page(generate(page_spec(308, 3)).image, cfg);
  ASSERT_EQ(res.debug.lines.size(), 3u);
  const auto path = emit_overlay(res, "lines", dir.string());
  EXPECT_EQ(fs::path(path).filename(), "overlay_lines.png");
  const auto rgb = detail::read_png_rgb(path);
  BinaryImage red(rgb.width, rgb.height);
  for (int i = 0; i < rgb.width * rgb.height; ++i)
    red.data()[i] = rgb.rgb[3 * i] == kLineColor[0] && rgb.rgb[3 * i + 1] == kLineColor[1] && rgb.rgb[3 * i + 2] == kLineColor[2];
  EXPECT_EQ(connected_components(red).size(), 3u);
}

TEST(Overlay, MatraRowsHighlighted) {
  const auto dir = scratch("overlay_matra");
  PageSpec s = page_spec(309, 1);
  s.words_per_line = {1, 1};
  PipelineConfig cfg;
  cfg.debug_overlays = true;
  const auto res = process_page(generate(s).image, cfg);
  ASSERT_EQ(res.debug.matras.size(), 1u);
  const auto rgb = detail::read_png_rgb(emit_overlay(res, "matra", dir.string()));
  const auto& mt = res.debug.matras[0];
  const auto at = [&](int x, int y) { return std::array<std::uint8_t, 3>{rgb.rgb[(y * rgb.width + x) * 3], rgb.rgb[(y * rgb.width + x) * 3 + 1], rgb.rgb[(y * rgb.width + x) * 3 + 2]}; };
  EXPECT_EQ(at(mt.word.x + 1, mt.row_start), kMatraColor);
  EXPECT_NE(at(mt.word.x + 1, mt.row_end + 3), kMatraColor);
}

TEST(Overlay, UnknownStageAndMissingDebug) {
  PipelineConfig cfg;
  cfg.debug_overlays = true;
  const auto res = process_page(generate(page_spec(310, 1)).image, cfg);
  EXPECT_THROW(emit_overlay(res, "foo", scratch("overlay_bad").string()), ParameterError);
  const auto plain = process_page(generate(page_spec(310, 1)).image, PipelineConfig{});
  EXPECT_THROW(emit_overlay(plain, "lines", scratch("overlay_bad").string()), ParameterError);
}

TEST(Overlay, RunPipelineWritesAllStages) {
  const auto dir = scratch("overlay_all");
  const auto in = write_page(dir, "p.png", generate(page_spec(311, 2)).image);
  PipelineConfig cfg;
  cfg.debug_overlays = true;
  cfg.write_crops = false;
  run_pipeline(in.string(), cfg, (dir / "out").string());
  for (const auto& s : overlay_stages()) EXPECT_TRUE(fs::exists(dir / "out" / ("overlay_" + s + ".png"))) << s;
}

// ---------------------------------------------------------------------------
// Batch

TEST(Batch, CorruptFileIsolated) {
  const auto dir = scratch("batch");
  write_page(dir, "good.png", generate(page_spec(312, 2)).image);
  std::ofstream(dir / "bad.png") << "corrupt";
  const auto root = dir / "nested" / "out";
  const auto summary = batch((dir / "*.png").string(), PipelineConfig{}, root.string());
  EXPECT_EQ(summary.pages, 1);
  ASSERT_EQ(summary.failures.size(), 1u);
  EXPECT_NE(summary.failures[0].path.find("bad.png"), std::string::npos);
  EXPECT_TRUE(fs::exists(root / "good" / "manifest.json"));
  EXPECT_FALSE(fs::exists(root / "bad" / "manifest.json"));
  EXPECT_TRUE(fs::exists(root / "summary.json"));
}

TEST(Batch, TotalsMatchManifests) {
  const auto dir = scratch("batch_totals");
  for (int i = 0; i < 3; ++i) write_page(dir, "p" + std::to_string(i) + ".png", generate(page_spec(320 + i, 2)).image);
  PipelineConfig cfg;
  cfg.write_crops = false;
  const auto summary = batch((dir / "p*.png").string(), cfg, (dir / "out").string());
  EXPECT_EQ(summary.pages, 3);
  long long total = 0;
  for (int i = 0; i < 3; ++i) total += load_manifest((dir / "out" / ("p" + std::to_string(i)) / "manifest.json").string()).records.size();
  EXPECT_EQ(summary.total_records, total);
  const auto j = read_json_file((dir / "out" / "summary.json").string());
  EXPECT_EQ(j.at("total_records"), total);
}

TEST(Batch, NoMatchesIsError) {
  const auto dir = scratch("batch_none");
  EXPECT_THROW(batch((dir / "*.png").string(), PipelineConfig{}, (dir / "out").string()), ParameterError);
}
