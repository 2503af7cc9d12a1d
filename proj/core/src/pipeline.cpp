#include "tmars/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "tmars/error.hpp"
#include "tmars/manifest.hpp"

namespace tmars {

void ensure_writable(const std::filesystem::path& path, bool force) {
  if (!force && std::filesystem::exists(path)) {
    throw Error(ErrorKind::validation,
                "refusing to overwrite " + path.string() + " (pass --force)");
  }
}

ScoreHistogram ScoreHistogram::of(const std::map<std::string, double>& scores) {
  ScoreHistogram h;
  h.counts.assign(kBins, 0);
  for (const auto& [id, s] : scores) {
    double clamped = std::min(1.0, std::max(-1.0, s));
    int bin = static_cast<int>(std::floor((clamped + 1.0) / 2.0 * kBins));
    if (bin >= kBins) bin = kBins - 1;
    if (bin < 0) bin = 0;
    h.counts[static_cast<std::size_t>(bin)] += 1;
  }
  return h;
}

namespace {

void write_histogram_csv(const std::filesystem::path& path,
                         const std::vector<std::pair<std::string, ScoreHistogram>>& columns) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
  out << "bin_lo,bin_hi";
  for (const auto& [name, hist] : columns) out << ',' << name;
  out << '\n';
  for (int b = 0; b < ScoreHistogram::kBins; ++b) {
    double lo = -1.0 + 2.0 * b / ScoreHistogram::kBins;
    double hi = -1.0 + 2.0 * (b + 1) / ScoreHistogram::kBins;
    out << format_g9(lo) << ',' << format_g9(hi);
    for (const auto& [name, hist] : columns) out << ',' << hist.counts[b];
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

}  // namespace

RunOutputs run_pipeline(const PipelineConfig& config) {
  // Startup validation happens before any scoring work.
  if (config.workers < 1) {
    throw Error(ErrorKind::validation, "worker count must be >= 1");
  }
  if (!std::filesystem::exists(config.manifest_path)) {
    throw Error(ErrorKind::validation,
                "manifest does not exist: " + config.manifest_path.string());
  }
  if (!std::filesystem::exists(config.image_root)) {
    throw Error(ErrorKind::validation,
                "image root does not exist: " + config.image_root.string());
  }
  config.scorer.validate();
  config.strategy.validate();

  std::filesystem::create_directories(config.out_dir);
  RunOutputs out;
  out.scores_path = config.out_dir / "scores.jsonl";
  out.retention_path = config.out_dir / "retained.jsonl";
  out.report_path = config.out_dir / "report.json";
  out.histogram_path = config.out_dir / "histogram.csv";
  for (const auto& p :
       {out.scores_path, out.retention_path, out.report_path, out.histogram_path}) {
    ensure_writable(p, config.force);
  }

  auto t0 = std::chrono::steady_clock::now();
  auto records = read_manifest(config.manifest_path);
  auto images = open_image_source(config.image_root);

  out.scores = score_manifest(records, *images, config.scorer, config.workers);

  // For tmars runs the report also carries the pre-masking distribution.
  std::vector<std::pair<std::string, ScoreHistogram>> histogram_columns;
  if (config.scorer.method == ScoreMethod::tmars) {
    ScorerSpec clip_spec;
    clip_spec.method = ScoreMethod::clip;
    clip_spec.embedders = config.scorer.embedders;
    ScoreTable before = score_manifest(records, *images, clip_spec, config.workers);
    histogram_columns.push_back({"clip", ScoreHistogram::of(before.entries)});
    histogram_columns.push_back({"tmars", ScoreHistogram::of(out.scores.entries)});
  } else {
    histogram_columns.push_back(
        {out.scores.method, ScoreHistogram::of(out.scores.entries)});
  }

  out.retained = apply_filter(out.scores, config.strategy);
  auto t1 = std::chrono::steady_clock::now();

  write_score_table(out.scores, out.scores_path);
  write_retention(out.retained, out.retention_path);
  write_histogram_csv(out.histogram_path, histogram_columns);

  nlohmann::ordered_json report;
  report["manifest"] = config.manifest_path.string();
  report["method"] = out.scores.method;
  report["provenance"] = out.retained.provenance;
  report["records"] = records.size();
  report["retained"] = out.retained.ids.size();
  report["seed"] = config.seed;
  report["files"] = {{"scores", "scores.jsonl"},
                     {"retention", "retained.jsonl"},
                     {"histogram", "histogram.csv"}};
  {
    std::ofstream rep(out.report_path, std::ios::binary | std::ios::trunc);
    if (!rep) throw Error(ErrorKind::io, "cannot open for writing: " + out.report_path.string());
    rep << report.dump(2) << '\n';
    if (!rep) throw Error(ErrorKind::io, "write failed: " + out.report_path.string());
  }

  // Timing is informational only; it never lands in the output directory.
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
  std::cerr << "scored " << records.size() << " records, retained "
            << out.retained.ids.size() << " (" << ms << " ms)\n";
  return out;
}

ScalingReport report_scaling(const std::vector<ScalingPoint>& points,
                             const std::string& baseline_method) {
  std::map<std::uint64_t, double> baseline;
  for (const auto& p : points) {
    if (p.pool_size == 0) {
      throw Error(ErrorKind::validation, "pool_size must be > 0");
    }
    if (p.method == baseline_method) baseline[p.pool_size] = p.accuracy;
  }
  if (baseline.empty()) {
    throw Error(ErrorKind::validation,
                "no points for baseline method \"" + baseline_method + "\"");
  }

  std::map<std::string, std::map<std::uint64_t, double>> methods;
  for (const auto& p : points) {
    if (p.method == baseline_method) continue;
    if (!methods[p.method].emplace(p.pool_size, p.accuracy).second) {
      throw Error(ErrorKind::validation,
                  "duplicate point for method \"" + p.method + "\" at pool size " +
                      std::to_string(p.pool_size));
    }
  }

  ScalingReport report;
  for (const auto& [method, cells] : methods) {
    double sx = 0.0, sy = 0.0;
    std::vector<std::pair<double, double>> xy;
    for (const auto& [pool, acc] : cells) {
      auto it = baseline.find(pool);
      if (it == baseline.end()) {
        throw Error(ErrorKind::validation,
                    "method \"" + method + "\" has no baseline accuracy at pool size " +
                        std::to_string(pool));
      }
      double gain = acc - it->second;
      report.gains.push_back({method, pool, gain});
      double x = std::log2(static_cast<double>(pool));
      xy.push_back({x, gain});
      sx += x;
      sy += gain;
    }

    ScalingFit fit;
    fit.method = method;
    if (xy.size() < 2) {
      fit.slope = 0.0;
      fit.r_squared = 1.0;
    } else {
      double mx = sx / xy.size(), my = sy / xy.size();
      double sxx = 0.0, sxy = 0.0, syy = 0.0;
      for (const auto& [x, y] : xy) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
      }
      if (sxx == 0.0) {
        throw Error(ErrorKind::validation,
                    "cannot fit method \"" + method + "\": all pool sizes equal");
      }
      fit.slope = sxy / sxx;
      if (syy == 0.0) {
        fit.r_squared = 1.0;  // constant gains: the fit is exact
      } else {
        double ss_res = 0.0;
        double icpt = my - fit.slope * mx;
        for (const auto& [x, y] : xy) {
          double e = y - (icpt + fit.slope * x);
          ss_res += e * e;
        }
        fit.r_squared = 1.0 - ss_res / syy;
      }
    }
    report.fits.push_back(fit);
  }
  return report;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double_field(const std::string& s, const std::string& what, std::size_t line_no) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::parse,
                what + " line " + std::to_string(line_no) + ": bad number \"" + s + "\"");
  }
  return v;
}

std::uint64_t parse_u64_field(const std::string& s, const std::string& what,
                              std::size_t line_no) {
  char* end = nullptr;
  unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw Error(ErrorKind::parse,
                what + " line " + std::to_string(line_no) + ": bad integer \"" + s + "\"");
  }
  return v;
}

}  // namespace

std::vector<ScalingPoint> read_scaling_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open CSV: " + path.string());
  std::vector<ScalingPoint> points;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line_no == 1 && line.rfind("method", 0) == 0)) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      throw Error(ErrorKind::parse, "scaling CSV line " + std::to_string(line_no) +
                                        ": expected method,pool_size,accuracy");
    }
    ScalingPoint p;
    p.method = fields[0];
    p.pool_size = parse_u64_field(fields[1], "scaling CSV", line_no);
    p.accuracy = parse_double_field(fields[2], "scaling CSV", line_no);
    points.push_back(std::move(p));
  }
  return points;
}

void write_scaling_report(const ScalingReport& report,
                          const std::filesystem::path& gains_path,
                          const std::filesystem::path& fit_path) {
  {
    std::ofstream out(gains_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + gains_path.string());
    out << "method,pool_size,gain\n";
    for (const auto& g : report.gains) {
      out << g.method << ',' << g.pool_size << ',' << format_g9(g.gain) << '\n';
    }
    if (!out) throw Error(ErrorKind::io, "write failed: " + gains_path.string());
  }
  {
    std::ofstream out(fit_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + fit_path.string());
    out << "method,slope_per_doubling,r_squared\n";
    for (const auto& f : report.fits) {
      out << f.method << ',' << format_g9(f.slope) << ',' << format_g9(f.r_squared) << '\n';
    }
    if (!out) throw Error(ErrorKind::io, "write failed: " + fit_path.string());
  }
}

std::vector<PilotReportRow> pilot_report(const std::vector<SampleRecord>& records,
                                         const std::map<std::string, Category>& categories,
                                         const std::vector<RetentionSet>& sets) {
  for (const auto& rec : records) {
    if (!categories.count(rec.id)) {
      throw Error(ErrorKind::validation,
                  "record \"" + rec.id + "\" has no category assignment");
    }
  }
  for (const auto& set : sets) {
    if (set.source_count != records.size()) {
      throw Error(ErrorKind::validation,
                  "retention set \"" + set.provenance + "\" does not match the manifest (" +
                      std::to_string(set.source_count) + " vs " +
                      std::to_string(records.size()) + " records)");
    }
  }

  std::vector<PilotReportRow> rows;
  for (const auto& set : sets) {
    PilotReportRow row;
    row.method = set.provenance;
    row.fractions = retention_stats(set, categories);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_pilot_report(const std::vector<PilotReportRow>& rows,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
  out << "method";
  for (Category c : kAllCategories) out << ',' << category_name(c);
  out << '\n';
  for (const auto& row : rows) {
    out << row.method;
    for (Category c : kAllCategories) {
      auto it = row.fractions.find(c);
      out << ',';
      if (it != row.fractions.end() && it->second) {
        out << format_g9(*it->second);
      } else {
        out << "null";
      }
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

std::vector<UtilityPoint> read_utility_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open CSV: " + path.string());
  std::vector<UtilityPoint> points;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line_no == 1 && line.rfind("added_samples", 0) == 0)) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2) {
      throw Error(ErrorKind::parse, "utility CSV line " + std::to_string(line_no) +
                                        ": expected added_samples,accuracy");
    }
    UtilityPoint p;
    p.added_samples = parse_u64_field(fields[0], "utility CSV", line_no);
    p.accuracy = parse_double_field(fields[1], "utility CSV", line_no);
    if (p.accuracy < 0.0 || p.accuracy > 100.0) {
      throw Error(ErrorKind::parse, "utility CSV line " + std::to_string(line_no) +
                                        ": accuracy must be in [0, 100]");
    }
    points.push_back(p);
  }
  return points;
}

}  // namespace tmars
