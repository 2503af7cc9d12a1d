#include "tmars/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "tmars/error.hpp"
#include "tar_internal.hpp"

namespace tmars {
namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void line_error(std::size_t line_no, const std::string& what) {
  throw Error(ErrorKind::parse,
              "manifest line " + std::to_string(line_no) + ": " + what);
}

TextBox parse_box(const nlohmann::json& j, std::size_t line_no) {
  if (!j.is_array() || j.size() != 4) {
    line_error(line_no, "box must be a 4-element array");
  }
  for (const auto& v : j) {
    if (!v.is_number_integer()) line_error(line_no, "box coordinates must be integers");
  }
  TextBox box{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  if (box.x_min < 0 || box.y_min < 0 || box.x_min >= box.x_max || box.y_min >= box.y_max) {
    line_error(line_no, "invalid box coordinates");
  }
  return box;
}

SampleRecord parse_record(const std::string& line, std::size_t line_no) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    line_error(line_no, "not a valid JSON object");
  }

  SampleRecord rec;
  if (!j.contains("id") || !j["id"].is_string()) line_error(line_no, "missing string field \"id\"");
  if (!j.contains("image_ref") || !j["image_ref"].is_string())
    line_error(line_no, "missing string field \"image_ref\"");
  if (!j.contains("caption") || !j["caption"].is_string())
    line_error(line_no, "missing string field \"caption\"");

  rec.id = j["id"].get<std::string>();
  rec.image_ref = j["image_ref"].get<std::string>();
  rec.caption = j["caption"].get<std::string>();
  if (rec.id.empty()) line_error(line_no, "id must be non-empty");
  if (rec.image_ref.empty()) line_error(line_no, "image_ref must be non-empty");

  if (j.contains("boxes")) {
    if (!j["boxes"].is_array()) line_error(line_no, "\"boxes\" must be an array");
    std::vector<TextBox> boxes;
    for (const auto& b : j["boxes"]) boxes.push_back(parse_box(b, line_no));
    rec.boxes = std::move(boxes);
  }
  for (const char* key : {"tags_visual", "tags_text"}) {
    if (!j.contains(key)) continue;
    if (!j[key].is_array()) line_error(line_no, std::string("\"") + key + "\" must be an array");
    std::vector<std::uint32_t> tags;
    for (const auto& t : j[key]) {
      if (!t.is_number_unsigned() && !t.is_number_integer()) {
        line_error(line_no, std::string("\"") + key + "\" entries must be unsigned integers");
      }
      auto v = t.get<std::int64_t>();
      if (v < 0 || v > 0xFFFFFFFFll) line_error(line_no, "tag id out of uint32 range");
      tags.push_back(static_cast<std::uint32_t>(v));
    }
    if (std::string(key) == "tags_visual") {
      rec.tags_visual = std::move(tags);
    } else {
      rec.tags_text = std::move(tags);
    }
  }
  if (j.contains("scores")) {
    if (!j["scores"].is_object()) line_error(line_no, "\"scores\" must be an object");
    std::map<std::string, double> scores;
    for (auto it = j["scores"].begin(); it != j["scores"].end(); ++it) {
      if (!it.value().is_number()) line_error(line_no, "score values must be numbers");
      double v = it.value().get<double>();
      if (!std::isfinite(v)) line_error(line_no, "score values must be finite");
      scores[it.key()] = v;
    }
    rec.scores = std::move(scores);
  }
  return rec;
}

}  // namespace

std::vector<SampleRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open manifest: " + path.string());

  std::vector<SampleRecord> records;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    SampleRecord rec = parse_record(line, line_no);
    if (!seen.insert(rec.id).second) {
      throw Error(ErrorKind::parse, "duplicate id \"" + rec.id + "\" in manifest (line " +
                                        std::to_string(line_no) + ")");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string record_to_json_line(const SampleRecord& record) {
  ordered_json j;
  j["id"] = record.id;
  j["image_ref"] = record.image_ref;
  j["caption"] = record.caption;
  if (record.boxes) {
    ordered_json boxes = ordered_json::array();
    for (const auto& b : *record.boxes) {
      boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
    }
    j["boxes"] = std::move(boxes);
  }
  if (record.tags_visual) j["tags_visual"] = *record.tags_visual;
  if (record.tags_text) j["tags_text"] = *record.tags_text;
  if (record.scores) {
    ordered_json scores = ordered_json::object();
    for (const auto& [method, value] : *record.scores) {
      scores[method] = quantize_g9(value);
    }
    j["scores"] = std::move(scores);
  }
  return j.dump();
}

void write_manifest(const std::vector<SampleRecord>& records,
                    const std::filesystem::path& path) {
  std::set<std::string> seen;
  for (const auto& rec : records) {
    if (rec.id.empty()) {
      throw Error(ErrorKind::validation, "record with empty id");
    }
    if (!seen.insert(rec.id).second) {
      throw Error(ErrorKind::validation, "duplicate id \"" + rec.id + "\" in records");
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
  for (const auto& rec : records) {
    out << record_to_json_line(rec) << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

namespace {

struct ShardPair {
  std::string image_name;  // full member name
  bool has_image = false;
  bool image_ambiguous = false;
  std::uint64_t txt_offset = 0;
  std::uint64_t txt_size = 0;
  bool has_txt = false;
};

std::string strip_trailing_newline(std::string s) {
  if (!s.empty() && s.back() == '\n') s.pop_back();
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

std::vector<SampleRecord> read_shard(const std::filesystem::path& path) {
  auto members = detail::list_tar_members(path);

  std::map<std::string, ShardPair> pairs;  // stem -> pair, sorted by stem
  for (const auto& m : members) {
    auto dot = m.name.find_last_of('.');
    if (dot == std::string::npos) continue;
    std::string stem = m.name.substr(0, dot);
    std::string ext = m.name.substr(dot + 1);
    if (ext == "jpg" || ext == "jpeg" || ext == "png") {
      auto& pair = pairs[stem];
      if (pair.has_image) {
        pair.image_ambiguous = true;
      } else {
        pair.image_name = m.name;
        pair.has_image = true;
      }
    } else if (ext == "txt") {
      auto& pair = pairs[stem];
      pair.txt_offset = m.offset;
      pair.txt_size = m.size;
      pair.has_txt = true;
    }
    // other extensions (json sidecars etc.) are ignored
  }

  std::vector<SampleRecord> records;
  for (const auto& [stem, pair] : pairs) {
    if (pair.image_ambiguous) {
      throw Error(ErrorKind::parse,
                  "shard " + path.string() + ": stem \"" + stem + "\" has multiple image members");
    }
    if (!pair.has_image || !pair.has_txt) {
      throw Error(ErrorKind::parse,
                  "shard " + path.string() + ": stem \"" + stem + "\" is missing its " +
                      (pair.has_image ? "caption" : "image") + " member");
    }
    auto caption_bytes = detail::read_tar_payload(path, pair.txt_offset, pair.txt_size);
    SampleRecord rec;
    rec.id = stem;
    rec.image_ref = pair.image_name;
    rec.caption = strip_trailing_newline(
        std::string(caption_bytes.begin(), caption_bytes.end()));
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<SampleRecord> merge_shards(const std::vector<std::filesystem::path>& paths) {
  std::vector<std::vector<SampleRecord>> per_shard;
  per_shard.reserve(paths.size());
  for (const auto& p : paths) per_shard.push_back(read_shard(p));

  // Find ids appearing in more than one shard; those get the filename prefix.
  std::map<std::string, int> counts;
  for (const auto& records : per_shard) {
    for (const auto& rec : records) counts[rec.id] += 1;
  }

  std::vector<SampleRecord> merged;
  for (std::size_t i = 0; i < per_shard.size(); ++i) {
    std::string prefix = paths[i].filename().string() + "/";
    for (auto& rec : per_shard[i]) {
      if (counts[rec.id] > 1) rec.id = prefix + rec.id;
      merged.push_back(std::move(rec));
    }
  }

  std::set<std::string> seen;
  for (const auto& rec : merged) {
    if (!seen.insert(rec.id).second) {
      throw Error(ErrorKind::validation,
                  "merge produced duplicate id \"" + rec.id + "\"");
    }
  }
  return merged;
}

}  // namespace tmars
