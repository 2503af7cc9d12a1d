#include "tmars/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "tmars/error.hpp"

namespace tmars {

void FilterStrategy::validate() const {
  switch (kind) {
    case FilterKind::median:
      break;
    case FilterKind::threshold:
      if (!std::isfinite(tau)) {
        throw Error(ErrorKind::validation, "threshold tau must be finite");
      }
      break;
    case FilterKind::top_fraction:
      if (!(p > 0.0 && p <= 1.0)) {
        throw Error(ErrorKind::validation, "top-fraction p must be in (0, 1]");
      }
      break;
  }
}

std::string FilterStrategy::describe() const {
  switch (kind) {
    case FilterKind::median: return "median";
    case FilterKind::threshold: return "threshold(tau=" + format_g9(tau) + ")";
    case FilterKind::top_fraction: return "top_frac(p=" + format_g9(p) + ")";
  }
  return "?";
}

FilterStrategy FilterStrategy::parse(const std::string& text) {
  FilterStrategy s;
  if (text == "median") {
    s.kind = FilterKind::median;
    return s;
  }
  auto parse_value = [&](const std::string& prefix) -> std::optional<double> {
    if (text.rfind(prefix, 0) != 0) return std::nullopt;
    const std::string num = text.substr(prefix.size());
    char* end = nullptr;
    double v = std::strtod(num.c_str(), &end);
    if (num.empty() || end != num.c_str() + num.size()) {
      throw Error(ErrorKind::validation, "malformed filter strategy: " + text);
    }
    return v;
  };
  if (auto tau = parse_value("threshold=")) {
    s.kind = FilterKind::threshold;
    s.tau = *tau;
    s.validate();
    return s;
  }
  if (auto p = parse_value("top-frac=")) {
    s.kind = FilterKind::top_fraction;
    s.p = *p;
    s.validate();
    return s;
  }
  throw Error(ErrorKind::validation,
              "unknown filter strategy \"" + text +
                  "\" (expected median|threshold=<t>|top-frac=<p>)");
}

std::size_t top_fraction_count(double p, std::size_t n) {
  // ceil(p*n) on the decimal value of p. The epsilon absorbs representation
  // error of fractions like 0.9 whose product is a mathematical integer.
  long double x = static_cast<long double>(p) * static_cast<long double>(n);
  long double k = std::ceil(x - 1e-9L);
  if (k < 1.0L) k = 1.0L;
  if (k > static_cast<long double>(n)) k = static_cast<long double>(n);
  return static_cast<std::size_t>(k);
}

namespace {

RetentionSet select_top(const ScoreTable& table, std::size_t keep, std::string provenance) {
  struct Entry {
    const std::string* id;
    double score;
  };
  std::vector<Entry> entries;
  entries.reserve(table.entries.size());
  for (const auto& [id, score] : table.entries) entries.push_back({&id, score});

  auto better = [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    return *a.id < *b.id;
  };
  if (keep < entries.size()) {
    std::nth_element(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(keep) - 1,
                     entries.end(), better);
    entries.resize(keep);
  }

  RetentionSet out;
  out.provenance = std::move(provenance);
  out.source_count = table.entries.size();
  for (const auto& e : entries) out.ids.insert(*e.id);
  return out;
}

}  // namespace

RetentionSet top_fraction_filter(const ScoreTable& table, double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw Error(ErrorKind::validation, "top-fraction p must be in (0, 1]");
  }
  if (table.entries.empty()) {
    throw Error(ErrorKind::validation, "top-fraction filter on empty score table");
  }
  std::size_t keep = top_fraction_count(p, table.entries.size());
  return select_top(table, keep,
                    "top_frac(p=" + format_g9(p) + ") over " + table.method);
}

RetentionSet threshold_filter(const ScoreTable& table, double tau) {
  if (!std::isfinite(tau)) {
    throw Error(ErrorKind::validation, "threshold tau must be finite");
  }
  RetentionSet out;
  out.provenance = "threshold(tau=" + format_g9(tau) + ") over " + table.method;
  out.source_count = table.entries.size();
  for (const auto& [id, score] : table.entries) {
    if (score >= tau) out.ids.insert(id);
  }
  return out;
}

RetentionSet median_filter(const ScoreTable& table) {
  if (table.entries.empty()) {
    throw Error(ErrorKind::validation, "median filter on empty score table");
  }
  std::size_t keep = top_fraction_count(0.5, table.entries.size());
  return select_top(table, keep, "median over " + table.method);
}

RetentionSet apply_filter(const ScoreTable& table, const FilterStrategy& strategy) {
  strategy.validate();
  switch (strategy.kind) {
    case FilterKind::median: return median_filter(table);
    case FilterKind::threshold: return threshold_filter(table, strategy.tau);
    case FilterKind::top_fraction: return top_fraction_filter(table, strategy.p);
  }
  throw Error(ErrorKind::validation, "unknown filter kind");
}

RetentionSet intersect(const std::vector<RetentionSet>& sets) {
  if (sets.empty()) {
    throw Error(ErrorKind::validation, "intersect needs at least one retention set");
  }
  RetentionSet out = sets[0];
  for (std::size_t i = 1; i < sets.size(); ++i) {
    if (sets[i].source_count != out.source_count) {
      throw Error(ErrorKind::validation,
                  "retention sets come from different sources (source_count " +
                      std::to_string(out.source_count) + " vs " +
                      std::to_string(sets[i].source_count) + ")");
    }
    std::set<std::string> kept;
    for (const auto& id : sets[i].ids) {
      if (out.ids.count(id)) kept.insert(id);
    }
    out.ids = std::move(kept);
    out.provenance += " ∩ " + sets[i].provenance;
  }
  return out;
}

std::map<Category, std::optional<double>> retention_stats(
    const RetentionSet& set, const std::map<std::string, Category>& categories) {
  std::map<Category, std::uint64_t> totals, kept;
  for (Category c : kAllCategories) {
    totals[c] = 0;
    kept[c] = 0;
  }
  for (const auto& [id, cat] : categories) totals[cat] += 1;
  for (const auto& id : set.ids) {
    auto it = categories.find(id);
    if (it == categories.end()) {
      throw Error(ErrorKind::validation,
                  "retained id \"" + id + "\" has no category assignment");
    }
    kept[it->second] += 1;
  }
  std::map<Category, std::optional<double>> out;
  for (Category c : kAllCategories) {
    if (totals[c] == 0) {
      out[c] = std::nullopt;
    } else {
      out[c] = static_cast<double>(kept[c]) / static_cast<double>(totals[c]);
    }
  }
  return out;
}

void write_retention(const RetentionSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
  nlohmann::ordered_json header;
  header["provenance"] = set.provenance;
  header["source_count"] = set.source_count;
  header["retained"] = set.ids.size();
  out << header.dump() << '\n';
  for (const auto& id : set.ids) {
    out << nlohmann::json(id).dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

RetentionSet read_retention(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open retention file: " + path.string());

  RetentionSet set;
  std::string line;
  std::size_t line_no = 0;
  std::size_t declared = 0;
  std::string prev_id;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorKind::parse,
                  "retention file line " + std::to_string(line_no) + ": invalid JSON");
    }
    if (line_no == 1) {
      if (!j.is_object() || !j.contains("provenance") || !j.contains("source_count") ||
          !j.contains("retained")) {
        throw Error(ErrorKind::parse, "retention file line 1: malformed header");
      }
      set.provenance = j["provenance"].get<std::string>();
      set.source_count = j["source_count"].get<std::uint64_t>();
      declared = j["retained"].get<std::size_t>();
      continue;
    }
    if (!j.is_string()) {
      throw Error(ErrorKind::parse,
                  "retention file line " + std::to_string(line_no) + ": expected an id string");
    }
    std::string id = j.get<std::string>();
    if (!prev_id.empty() && !(prev_id < id)) {
      throw Error(ErrorKind::parse, "retention file ids must be strictly ascending");
    }
    prev_id = id;
    set.ids.insert(std::move(id));
  }
  if (line_no == 0) throw Error(ErrorKind::parse, "retention file is empty: " + path.string());
  if (set.ids.size() != declared) {
    throw Error(ErrorKind::parse,
                "retention header claims " + std::to_string(declared) + " ids, found " +
                    std::to_string(set.ids.size()));
  }
  return set;
}

}  // namespace tmars
