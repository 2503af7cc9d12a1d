// Command-line front end for the data-curation pipeline: detection, masking,
// scoring, filtering, set algebra, synthetic corpora and report generation.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "tmars/embedder.hpp"
#include "tmars/error.hpp"
#include "tmars/filtering.hpp"
#include "tmars/manifest.hpp"
#include "tmars/masking.hpp"
#include "tmars/pipeline.hpp"
#include "tmars/scoring.hpp"
#include "tmars/synth.hpp"
#include "tmars/taxonomy.hpp"

namespace fs = std::filesystem;
using namespace tmars;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitAggregate = 3;
constexpr int kExitIo = 4;

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::validation:
    case ErrorKind::parse:
      return kExitValidation;
    case ErrorKind::aggregate:
    case ErrorKind::provider:
      return kExitAggregate;
    case ErrorKind::io:
      return kExitIo;
  }
  return 1;
}

void ensure_dir_writable(const fs::path& dir, bool force) {
  if (force || !fs::exists(dir)) return;
  if (!fs::is_directory(dir)) {
    throw Error(ErrorKind::validation,
                "output path exists and is not a directory: " + dir.string());
  }
  if (!fs::is_empty(dir)) {
    throw Error(ErrorKind::validation,
                "refusing to write into non-empty directory " + dir.string() +
                    " (pass --force)");
  }
}

ScorerSpec build_scorer(const std::string& method_name,
                        const std::vector<std::string>& embedder_specs) {
  auto method = score_method_from_name(method_name);
  if (!method) {
    throw Error(ErrorKind::validation, "unknown score method \"" + method_name + "\"");
  }
  ScorerSpec spec;
  spec.method = *method;
  for (const auto& s : embedder_specs) spec.embedders.push_back(make_embedder(s));
  if (spec.method == ScoreMethod::tmars) {
    spec.detector = std::make_shared<OracleDetector>();
  }
  spec.validate();
  return spec;
}

struct CommonArgs {
  std::string manifest;
  std::string images;
  std::string out;
  std::vector<std::string> embedders{"mock"};
  int workers = 1;
  bool force = false;
};

int cmd_detect(const CommonArgs& args) {
  auto records = read_manifest(args.manifest);
  auto images = open_image_source(args.images);
  OracleDetector detector;

  std::vector<std::string> failed;
  for (auto& rec : records) {
    try {
      Image image = decode_image(images->read_bytes(rec.image_ref));
      rec.boxes = detector.detect(image, rec);
    } catch (const std::exception& e) {
      failed.push_back(rec.id);
    }
  }
  if (!failed.empty()) throw AggregateError("text detection failed", std::move(failed));

  ensure_writable(args.out, args.force);
  write_manifest(records, args.out);
  std::cerr << "wrote " << records.size() << " records with detected boxes\n";
  return 0;
}

int cmd_mask(const CommonArgs& args) {
  auto records = read_manifest(args.manifest);
  auto images = open_image_source(args.images);
  OracleDetector detector;

  fs::path out_dir(args.out);
  ensure_dir_writable(out_dir, args.force);
  fs::create_directories(out_dir / "masked");

  std::vector<SampleRecord> out_records = records;
  std::vector<std::string> failures(records.size());
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = cursor.fetch_add(1);
      if (i >= records.size()) return;
      try {
        Image image = decode_image(images->read_bytes(records[i].image_ref));
        Image masked = mask_image(image, detector.detect(image, records[i]));
        std::string ref = "masked/" + records[i].id + ".png";
        save_png_file(masked, out_dir / ref);
        out_records[i].image_ref = ref;
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < std::max(1, args.workers); ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::vector<std::string> failed;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!failures[i].empty()) failed.push_back(records[i].id);
  }
  if (!failed.empty()) throw AggregateError("masking failed", std::move(failed));

  write_manifest(out_records, out_dir / "manifest.jsonl");
  std::cerr << "masked " << records.size() << " images into " << out_dir.string() << "\n";
  return 0;
}

int cmd_score(const CommonArgs& args, const std::string& method) {
  auto records = read_manifest(args.manifest);
  auto images = open_image_source(args.images);
  auto spec = build_scorer(method, args.embedders);

  ensure_writable(args.out, args.force);
  ScoreTable table = score_manifest(records, *images, spec, args.workers);
  write_score_table(table, args.out);
  std::cerr << "scored " << table.entries.size() << " records with " << table.method << "\n";
  return 0;
}

int cmd_filter(const std::string& scores_path, const std::string& strategy_text,
               const std::string& out, bool force) {
  ScoreTable table = read_score_table(scores_path);
  FilterStrategy strategy = FilterStrategy::parse(strategy_text);
  RetentionSet set = apply_filter(table, strategy);
  ensure_writable(out, force);
  write_retention(set, out);
  std::cerr << "retained " << set.ids.size() << " of " << set.source_count << "\n";
  return 0;
}

int cmd_text_match(const std::string& manifest, const std::string& ocr_path,
                   const std::string& out, bool force) {
  auto records = read_manifest(manifest);
  auto ocr = read_ocr_annotations(ocr_path);
  RetentionSet set = text_match_filter(records, ocr);
  ensure_writable(out, force);
  write_retention(set, out);
  std::cerr << "text-match retained " << set.ids.size() << " of " << set.source_count << "\n";
  return 0;
}

int cmd_intersect(const std::vector<std::string>& inputs, const std::string& out, bool force) {
  std::vector<RetentionSet> sets;
  for (const auto& p : inputs) sets.push_back(read_retention(p));
  RetentionSet merged = intersect(sets);
  ensure_writable(out, force);
  write_retention(merged, out);
  std::cerr << "intersection keeps " << merged.ids.size() << " ids\n";
  return 0;
}

int cmd_stats(const std::string& retention_path, const std::string& categories_path,
              const std::string& out, bool force) {
  RetentionSet set = read_retention(retention_path);
  auto categories = read_categories(categories_path);
  auto stats = retention_stats(set, categories);

  std::ostringstream body;
  body << "category,retained_fraction\n";
  for (Category c : kAllCategories) {
    body << category_name(c) << ',';
    if (stats[c]) {
      body << format_g9(*stats[c]);
    } else {
      body << "null";
    }
    body << '\n';
  }
  if (out.empty()) {
    std::cout << body.str();
  } else {
    ensure_writable(out, force);
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::io, "cannot open for writing: " + out);
    f << body.str();
  }
  return 0;
}

int cmd_run(const CommonArgs& args, const std::string& method,
            const std::string& strategy_text, std::uint64_t seed) {
  PipelineConfig config;
  config.manifest_path = args.manifest;
  config.image_root = args.images;
  config.scorer = build_scorer(method, args.embedders);
  config.strategy = FilterStrategy::parse(strategy_text);
  config.out_dir = args.out;
  config.workers = args.workers;
  config.seed = seed;
  config.force = args.force;
  run_pipeline(config);
  return 0;
}

int cmd_synth_build(const std::string& mode, std::size_t count, std::uint64_t seed,
                    const std::string& out, bool force) {
  fs::path out_dir(out);
  ensure_dir_writable(out_dir, force);

  std::vector<PoolSample> samples;
  if (mode == "pilot") {
    samples = build_pilot(count, seed);
  } else if (mode == "pool") {
    PoolSpec spec;
    spec.seed = seed;
    samples = build_pools(make_sources(count, seed), spec);
  } else {
    throw Error(ErrorKind::validation, "synth build --mode must be pool or pilot");
  }
  write_pool(samples, out_dir);

  std::map<std::string, std::size_t> per_category;
  for (const auto& s : samples) per_category[category_name(s.category)] += 1;
  std::cerr << "built " << samples.size() << " samples:";
  for (const auto& [cat, n] : per_category) std::cerr << ' ' << cat << '=' << n;
  std::cerr << '\n';
  return 0;
}

int cmd_synth_utility(const std::string& points_path, const std::string& out, bool force) {
  auto points = read_utility_csv(points_path);
  double slope = utility_slope(points);
  std::string body = "utility_per_million\n" + format_g9(slope) + "\n";
  if (out.empty()) {
    std::cout << body;
  } else {
    ensure_writable(out, force);
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::io, "cannot open for writing: " + out);
    f << body;
  }
  return 0;
}

int cmd_report_scaling(const std::string& points_path, const std::string& baseline,
                       const std::string& out, std::string fit_out, bool force) {
  auto points = read_scaling_csv(points_path);
  auto report = report_scaling(points, baseline);
  if (fit_out.empty()) fit_out = out + ".fit.csv";
  ensure_writable(out, force);
  ensure_writable(fit_out, force);
  write_scaling_report(report, out, fit_out);
  std::cerr << "wrote " << report.gains.size() << " gains and " << report.fits.size()
            << " fits\n";
  return 0;
}

int cmd_report_pilot(const std::string& manifest, const std::string& categories_path,
                     const std::vector<std::string>& retention_paths, const std::string& out,
                     bool force) {
  auto records = read_manifest(manifest);
  auto categories = read_categories(categories_path);
  std::vector<RetentionSet> sets;
  for (const auto& p : retention_paths) sets.push_back(read_retention(p));
  auto rows = pilot_report(records, categories, sets);
  ensure_writable(out, force);
  write_pilot_report(rows, out);
  std::cerr << "wrote pilot table with " << rows.size() << " rows\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"T-MARS style image-caption data curation"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string method = "tmars";
  std::string strategy = "median";
  std::string scores_path;
  std::string retention_path;
  std::string categories_path;
  std::vector<std::string> inputs;
  std::vector<std::string> retention_paths;
  std::string points_path;
  std::string baseline = "LAION";
  std::string fit_out;
  std::string mode = "pilot";
  std::size_t count = 500;
  std::uint64_t seed = 0;

  auto add_force = [&](CLI::App* cmd) { cmd->add_flag("--force", args.force, "overwrite existing outputs"); };

  auto* detect = app.add_subcommand("detect", "clamp and validate annotated text boxes");
  detect->add_option("--manifest", args.manifest)->required();
  detect->add_option("--images", args.images)->required();
  detect->add_option("--out", args.out)->required();
  add_force(detect);

  auto* mask = app.add_subcommand("mask", "mask detected text regions, write PNGs");
  mask->add_option("--manifest", args.manifest)->required();
  mask->add_option("--images", args.images)->required();
  mask->add_option("--out", args.out)->required();
  mask->add_option("--workers", args.workers);
  add_force(mask);

  auto* score = app.add_subcommand("score", "score a manifest");
  score->add_option("--method", method, "clip|tmars|cssft|crho");
  score->add_option("--manifest", args.manifest)->required();
  score->add_option("--images", args.images)->required();
  score->add_option("--embedder", args.embedders,
                    "mock|mock:<salt>|tag|file=<prefix>|http=<url> (repeat for "
                    "cssft checkpoints or crho train,val)")
      ->take_all();
  score->add_option("--out", args.out)->required();
  score->add_option("--workers", args.workers);
  add_force(score);

  auto* filter = app.add_subcommand("filter", "turn a score table into a retention set");
  filter->add_option("--strategy", strategy, "median|threshold=<t>|top-frac=<p>");
  filter->add_option("--scores", scores_path)->required();
  filter->add_option("--out", args.out)->required();
  add_force(filter);

  std::string ocr_path;
  auto* textmatch = app.add_subcommand("text-match", "retain records without caption-overlapping text");
  textmatch->add_option("--manifest", args.manifest)->required();
  textmatch->add_option("--ocr", ocr_path, "OCR annotation JSONL")->required();
  textmatch->add_option("--out", args.out)->required();
  add_force(textmatch);

  auto* isect = app.add_subcommand("intersect", "intersect retention sets");
  isect->add_option("--in", inputs, "retention files")->required()->take_all();
  isect->add_option("--out", args.out)->required();
  add_force(isect);

  auto* stats = app.add_subcommand("stats", "per-category retention fractions");
  stats->add_option("--retention", retention_path)->required();
  stats->add_option("--categories", categories_path)->required();
  stats->add_option("--out", args.out, "CSV path (stdout when omitted)");
  add_force(stats);

  auto* run = app.add_subcommand("run", "score + filter + report in one pass");
  run->add_option("--manifest", args.manifest)->required();
  run->add_option("--images", args.images)->required();
  run->add_option("--method", method, "clip|tmars|cssft|crho");
  run->add_option("--embedder", args.embedders)->take_all();
  run->add_option("--strategy", strategy);
  run->add_option("--out", args.out)->required();
  run->add_option("--workers", args.workers);
  run->add_option("--seed", seed);
  add_force(run);

  auto* synth = app.add_subcommand("synth", "synthetic corpora");
  synth->require_subcommand(1);
  auto* synth_build = synth->add_subcommand("build", "generate a synthetic corpus");
  synth_build->add_option("--mode", mode, "pool|pilot");
  synth_build->add_option("--count", count,
                          "pilot: total samples; pool: base source count");
  synth_build->add_option("--seed", seed);
  synth_build->add_option("--out", args.out)->required();
  add_force(synth_build);

  auto* synth_utility = synth->add_subcommand("utility", "least-squares utility slope");
  synth_utility->add_option("--points", points_path, "CSV added_samples,accuracy")->required();
  synth_utility->add_option("--out", args.out, "output path (stdout when omitted)");
  add_force(synth_utility);

  auto* report = app.add_subcommand("report", "report generation");
  report->require_subcommand(1);
  auto* report_scaling_cmd = report->add_subcommand("scaling", "gains vs baseline + log2 fit");
  report_scaling_cmd->add_option("--points", points_path, "CSV method,pool_size,accuracy")
      ->required();
  report_scaling_cmd->add_option("--baseline", baseline, "baseline method name");
  report_scaling_cmd->add_option("--out", args.out, "gains CSV")->required();
  report_scaling_cmd->add_option("--fit-out", fit_out, "fit CSV (default <out>.fit.csv)");
  add_force(report_scaling_cmd);

  auto* report_pilot_cmd = report->add_subcommand("pilot", "methods x categories table");
  report_pilot_cmd->add_option("--manifest", args.manifest)->required();
  report_pilot_cmd->add_option("--categories", categories_path)->required();
  report_pilot_cmd->add_option("--retention", retention_paths, "retention files")
      ->required()
      ->take_all();
  report_pilot_cmd->add_option("--out", args.out)->required();
  add_force(report_pilot_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(detect)) return cmd_detect(args);
    if (app.got_subcommand(mask)) return cmd_mask(args);
    if (app.got_subcommand(score)) return cmd_score(args, method);
    if (app.got_subcommand(filter)) return cmd_filter(scores_path, strategy, args.out, args.force);
    if (app.got_subcommand(textmatch))
      return cmd_text_match(args.manifest, ocr_path, args.out, args.force);
    if (app.got_subcommand(isect)) return cmd_intersect(inputs, args.out, args.force);
    if (app.got_subcommand(stats))
      return cmd_stats(retention_path, categories_path, args.out, args.force);
    if (app.got_subcommand(run)) return cmd_run(args, method, strategy, seed);
    if (app.got_subcommand(synth)) {
      if (synth->got_subcommand(synth_build))
        return cmd_synth_build(mode, count, seed, args.out, args.force);
      if (synth->got_subcommand(synth_utility))
        return cmd_synth_utility(points_path, args.out, args.force);
    }
    if (app.got_subcommand(report)) {
      if (report->got_subcommand(report_scaling_cmd))
        return cmd_report_scaling(points_path, baseline, args.out, fit_out, args.force);
      if (report->got_subcommand(report_pilot_cmd))
        return cmd_report_pilot(args.manifest, categories_path, retention_paths, args.out,
                                args.force);
    }
    std::cerr << "no subcommand selected\n";
    return kExitValidation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
