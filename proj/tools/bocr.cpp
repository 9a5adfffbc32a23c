// Command-line front end: segment, batch, synth, eval, ablate.
// Exit codes: 0 success, 1 I/O or processing error, 2 configuration or usage error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bocr/config.hpp"
#include "bocr/eval.hpp"
#include "bocr/image_io.hpp"
#include "bocr/manifest.hpp"
#include "bocr/pipeline.hpp"
#include "bocr/synth.hpp"

namespace fs = std::filesystem;
using namespace bocr;

namespace {

struct PipelineFlags {
  std::string config;
  std::vector<std::string> disable;
  bool debug_overlays = false;
  double step = 0;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file; missing keys keep defaults");
  cmd->add_option("--disable", f.disable, "Skip a stage (crop, skew, dewarp, denoise, multifont); repeatable");
  cmd->add_flag("--debug-overlays", f.debug_overlays, "Write overlay_<stage>.png images");
  cmd->add_option("--step", f.step, "Skew search step in degrees");
}

// Config file first, then command-line overrides.
PipelineConfig build_config(const PipelineFlags& f) {
  PipelineConfig cfg = f.config.empty() ? PipelineConfig{} : load_config(f.config);
  for (const auto& s : f.disable) disable_stage(cfg, s);
  if (f.debug_overlays) cfg.debug_overlays = true;
  if (f.step != 0) cfg.skew.step_deg = f.step;
  validate(cfg);
  return cfg;
}

PageSpec load_spec(const std::string& path) {
  try {
    return read_json_file(path).get<PageSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed page spec '" + path + "': " + e.what());
  }
}

GroundTruth load_truth(const std::string& path) {
  try {
    return read_json_file(path).get<GroundTruth>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed ground truth '" + path + "': " + e.what());
  }
}

std::vector<PageSpec> load_corpus(const std::string& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("corpus '" + dir + "' is not a directory");
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<PageSpec> corpus;
  for (const auto& f : files) corpus.push_back(load_spec(f.string()));
  if (corpus.empty()) throw IoError("corpus '" + dir + "' has no .json page specs");
  return corpus;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Page preprocessing and line/word/character segmentation"};
  app.require_subcommand(1);

  PipelineFlags seg_flags, batch_flags, ablate_flags;
  std::string seg_input, seg_out, batch_glob, batch_out;
  auto* seg = app.add_subcommand("segment", "Segment one page image");
  seg->add_option("input", seg_input, "PNG or JPEG page")->required();
  seg->add_option("--out", seg_out, "Output directory")->required();
  add_pipeline_flags(seg, seg_flags);

  auto* bat = app.add_subcommand("batch", "Segment every file matching a pattern");
  bat->add_option("glob", batch_glob, "File pattern, wildcards in the file name only")->required();
  bat->add_option("--out", batch_out, "Output root; one subdirectory per page")->required();
  add_pipeline_flags(bat, batch_flags);

  std::string spec_path, synth_out;
  auto* syn = app.add_subcommand("synth", "Render a synthetic page and its ground truth");
  syn->add_option("--spec", spec_path, "Page spec JSON")->required();
  syn->add_option("--out", synth_out, "Output directory (page.png, truth.json)")->required();

  std::string manifest_path, truth_path, report_out;
  double iou = 0.7;
  auto* ev = app.add_subcommand("eval", "Score a manifest against ground truth");
  ev->add_option("--manifest", manifest_path, "manifest.json")->required();
  ev->add_option("--truth", truth_path, "truth.json")->required();
  ev->add_option("--iou", iou, "Interval IoU threshold")->check(CLI::Range(0.0, 1.0));
  ev->add_option("--out", report_out, "Also write the report here");

  std::string corpus_dir, table_out;
  auto* abl = app.add_subcommand("ablate", "Run a corpus with each stage excluded in turn");
  abl->add_option("--corpus", corpus_dir, "Directory of page spec JSON files")->required();
  abl->add_option("--out", table_out, "CSV table")->required();
  add_pipeline_flags(abl, ablate_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*seg) {
      const auto m = run_pipeline(seg_input, build_config(seg_flags), seg_out);
      std::printf("%d lines, %d words, %d chars -> %s\n", m.counts.lines, m.counts.words, m.counts.chars,
                  (fs::path(seg_out) / "manifest.json").c_str());
      for (const auto& w : m.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    } else if (*bat) {
      const auto s = batch(batch_glob, build_config(batch_flags), batch_out);
      std::printf("%s\n", to_json(s).dump(2).c_str());
    } else if (*syn) {
      const auto page = generate(load_spec(spec_path));
      fs::create_directories(synth_out);
      write_png((fs::path(synth_out) / "page.png").string(), page.image);
      write_text_file((fs::path(synth_out) / "truth.json").string(), nlohmann::json(page.truth).dump(2) + "\n");
      std::printf("%zu chars -> %s\n", page.truth.chars.size(), synth_out.c_str());
    } else if (*ev) {
      const auto rep = score(load_manifest(manifest_path), load_truth(truth_path), iou);
      const auto text = to_json(rep).dump(2) + "\n";
      if (!report_out.empty()) write_text_file(report_out, text);
      std::printf("%s", text.c_str());
    } else if (*abl) {
      const auto rows = ablation(load_corpus(corpus_dir), build_config(ablate_flags));
      const auto csv = ablation_csv(rows);
      write_text_file(table_out, csv);
      std::printf("%s", csv.c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
