#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tmars/scoring.hpp"
#include "tmars/types.hpp"

namespace tmars {

/// The set of sample ids a filter retains, with provenance.
struct RetentionSet {
  std::set<std::string> ids;
  std::string provenance;
  std::uint64_t source_count = 0;

  friend bool operator==(const RetentionSet&, const RetentionSet&) = default;
};

enum class FilterKind { median, threshold, top_fraction };

struct FilterStrategy {
  FilterKind kind = FilterKind::median;
  double tau = 0.0;  // threshold only
  double p = 0.5;    // top_fraction only

  void validate() const;
  std::string describe() const;

  /// Parses "median", "threshold=<t>" or "top-frac=<p>".
  static FilterStrategy parse(const std::string& text);
};

/// Number of ids a top-fraction filter keeps: the mathematical ceil(p*n),
/// computed with a small guard so decimal fractions like 0.9 behave exactly.
std::size_t top_fraction_count(double p, std::size_t n);

/// Keeps exactly ceil(p*n) ids by descending score, ties broken by ascending
/// id. p in (0, 1]; the table must be non-empty.
RetentionSet top_fraction_filter(const ScoreTable& table, double p);

/// Keeps exactly the ids with score >= tau (a score equal to the threshold is
/// retained; "below" is the filtered side).
RetentionSet threshold_filter(const ScoreTable& table, double tau);

/// The median rule, canonicalized as top_fraction_filter(table, 0.5): exactly
/// ceil(n/2) ids survive regardless of ties.
RetentionSet median_filter(const ScoreTable& table);

RetentionSet apply_filter(const ScoreTable& table, const FilterStrategy& strategy);

/// Set intersection; provenance concatenates member provenances with a
/// intersection sign. All sets must share source_count.
RetentionSet intersect(const std::vector<RetentionSet>& sets);

/// Per-category retained fraction; categories with zero members report
/// nullopt. Every retained id must be categorized.
std::map<Category, std::optional<double>> retention_stats(
    const RetentionSet& set, const std::map<std::string, Category>& categories);

/// JSONL persistence: header {"provenance": str, "source_count": n,
/// "retained": k}, then one JSON-encoded id per line, ascending.
void write_retention(const RetentionSet& set, const std::filesystem::path& path);
RetentionSet read_retention(const std::filesystem::path& path);

}  // namespace tmars
