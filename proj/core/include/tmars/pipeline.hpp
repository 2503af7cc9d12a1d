#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tmars/filtering.hpp"
#include "tmars/scoring.hpp"
#include "tmars/synth.hpp"
#include "tmars/types.hpp"

namespace tmars {

/// End-to-end run configuration: score the manifest, apply the filter, write
/// scores + retention + a deterministic run report into out_dir.
struct PipelineConfig {
  std::filesystem::path manifest_path;
  std::filesystem::path image_root;  // directory or .tar shard
  ScorerSpec scorer;
  FilterStrategy strategy;
  std::filesystem::path out_dir;
  int workers = 1;
  std::uint64_t seed = 0;
  bool force = false;
};

struct RunOutputs {
  ScoreTable scores;
  RetentionSet retained;
  std::filesystem::path scores_path;
  std::filesystem::path retention_path;
  std::filesystem::path report_path;
  std::filesystem::path histogram_path;
};

/// Runs score_manifest + the configured filter. Outputs are byte-identical
/// across worker counts and repeated runs; wall-clock timing goes to stderr
/// only. Existing output files are refused unless config.force is set.
RunOutputs run_pipeline(const PipelineConfig& config);

/// 50 uniform score bins over [-1, 1]; out-of-range values clamp into the end
/// bins. Used for the before/after masking report.
struct ScoreHistogram {
  static constexpr int kBins = 50;
  std::vector<std::uint64_t> counts;

  static ScoreHistogram of(const std::map<std::string, double>& scores);
};

/// One externally measured accuracy for a (method, pool size) cell.
struct ScalingPoint {
  std::string method;
  std::uint64_t pool_size = 0;
  double accuracy = 0.0;
};

struct ScalingGain {
  std::string method;
  std::uint64_t pool_size = 0;
  double gain = 0.0;
};

struct ScalingFit {
  std::string method;
  double slope = 0.0;  // gain per doubling of pool size
  double r_squared = 1.0;
};

struct ScalingReport {
  std::vector<ScalingGain> gains;  // sorted by (method, pool_size)
  std::vector<ScalingFit> fits;    // sorted by method
};

/// Gains over the baseline per shared pool size, plus a least-squares fit of
/// gain against log2(pool_size) per method. Every non-baseline point needs a
/// baseline accuracy at its pool size.
ScalingReport report_scaling(const std::vector<ScalingPoint>& points,
                             const std::string& baseline_method);

std::vector<ScalingPoint> read_scaling_csv(const std::filesystem::path& path);
void write_scaling_report(const ScalingReport& report,
                          const std::filesystem::path& gains_path,
                          const std::filesystem::path& fit_path);

/// Appendix-style pilot table: per retention set, the retained fraction of
/// each category. Rows are labeled by the set's provenance.
struct PilotReportRow {
  std::string method;
  std::map<Category, std::optional<double>> fractions;
};

std::vector<PilotReportRow> pilot_report(const std::vector<SampleRecord>& records,
                                         const std::map<std::string, Category>& categories,
                                         const std::vector<RetentionSet>& sets);

void write_pilot_report(const std::vector<PilotReportRow>& rows,
                        const std::filesystem::path& path);

std::vector<UtilityPoint> read_utility_csv(const std::filesystem::path& path);

/// Refuses to clobber an existing file unless force is set.
void ensure_writable(const std::filesystem::path& path, bool force);

}  // namespace tmars
