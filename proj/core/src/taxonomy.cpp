#include "tmars/taxonomy.hpp"

#include <cctype>
#include <fstream>
#include <unordered_set>

#include "json.hpp"

#include "tmars/error.hpp"

namespace tmars {

std::string normalize_text(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(ch)));
  }
  return out;
}

bool text_match(const std::vector<std::string>& ocr_strings, const std::string& caption) {
  constexpr std::size_t kWindow = 5;
  std::string norm_caption = normalize_text(caption);
  if (norm_caption.size() < kWindow) return false;

  // All caption 5-grams, checked by exact membership (no hashing shortcuts).
  std::unordered_set<std::string> grams;
  grams.reserve(norm_caption.size());
  for (std::size_t i = 0; i + kWindow <= norm_caption.size(); ++i) {
    grams.insert(norm_caption.substr(i, kWindow));
  }

  for (const auto& raw : ocr_strings) {
    std::string s = normalize_text(raw);
    if (s.size() < kWindow) continue;
    for (std::size_t i = 0; i + kWindow <= s.size(); ++i) {
      if (grams.count(s.substr(i, kWindow))) return true;
    }
  }
  return false;
}

Category classify_pair(const AnnotatedPair& pair) {
  bool ocr_present = !pair.ocr_strings.empty();
  bool match = ocr_present && text_match(pair.ocr_strings, pair.caption);
  if (pair.visual_correlated) {
    if (!ocr_present) return Category::S_i;
    return match ? Category::S_it : Category::S_irt;
  }
  return match ? Category::S_t : Category::S_r;
}

RetentionSet text_match_filter(const std::vector<SampleRecord>& records,
                               const std::map<std::string, std::vector<std::string>>& ocr) {
  RetentionSet out;
  out.provenance = "text_match";
  out.source_count = records.size();
  for (const auto& rec : records) {
    auto it = ocr.find(rec.id);
    if (it == ocr.end()) {
      throw Error(ErrorKind::validation,
                  "record \"" + rec.id + "\" has no OCR annotation");
    }
    if (!text_match(it->second, rec.caption)) out.ids.insert(rec.id);
  }
  return out;
}

void write_categories(const std::map<std::string, Category>& categories,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
  for (const auto& [id, cat] : categories) {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["category"] = category_name(cat);
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

std::map<std::string, Category> read_categories(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open category file: " + path.string());
  std::map<std::string, Category> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("category") ||
        !j["id"].is_string() || !j["category"].is_string()) {
      throw Error(ErrorKind::parse,
                  "category file line " + std::to_string(line_no) + ": malformed entry");
    }
    auto cat = category_from_name(j["category"].get<std::string>());
    if (!cat) {
      throw Error(ErrorKind::parse, "category file line " + std::to_string(line_no) +
                                        ": unknown category \"" +
                                        j["category"].get<std::string>() + "\"");
    }
    if (!out.emplace(j["id"].get<std::string>(), *cat).second) {
      throw Error(ErrorKind::parse, "category file line " + std::to_string(line_no) +
                                        ": duplicate id");
    }
  }
  return out;
}

void write_ocr_annotations(const std::map<std::string, std::vector<std::string>>& ocr,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
  for (const auto& [id, strings] : ocr) {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["ocr"] = strings;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

std::map<std::string, std::vector<std::string>> read_ocr_annotations(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open OCR file: " + path.string());
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("ocr") ||
        !j["id"].is_string() || !j["ocr"].is_array()) {
      throw Error(ErrorKind::parse,
                  "OCR file line " + std::to_string(line_no) + ": malformed entry");
    }
    std::vector<std::string> strings;
    for (const auto& s : j["ocr"]) {
      if (!s.is_string() || s.get<std::string>().empty()) {
        throw Error(ErrorKind::parse, "OCR file line " + std::to_string(line_no) +
                                          ": ocr entries must be non-empty strings");
      }
      strings.push_back(s.get<std::string>());
    }
    if (!out.emplace(j["id"].get<std::string>(), std::move(strings)).second) {
      throw Error(ErrorKind::parse,
                  "OCR file line " + std::to_string(line_no) + ": duplicate id");
    }
  }
  return out;
}

}  // namespace tmars
