#include "tmars/scoring.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "tmars/error.hpp"

namespace tmars {

const char* score_method_name(ScoreMethod m) {
  switch (m) {
    case ScoreMethod::clip: return "clip";
    case ScoreMethod::tmars: return "tmars";
    case ScoreMethod::cssft: return "cssft";
    case ScoreMethod::crho: return "crho";
  }
  return "?";
}

std::optional<ScoreMethod> score_method_from_name(const std::string& name) {
  for (ScoreMethod m : {ScoreMethod::clip, ScoreMethod::tmars, ScoreMethod::cssft,
                        ScoreMethod::crho}) {
    if (name == score_method_name(m)) return m;
  }
  return std::nullopt;
}

void write_score_table(const ScoreTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
  nlohmann::ordered_json header;
  header["method"] = table.method;
  header["count"] = table.entries.size();
  out << header.dump() << '\n';
  for (const auto& [id, score] : table.entries) {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["score"] = quantize_g9(score);
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

ScoreTable read_score_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open score table: " + path.string());

  ScoreTable table;
  std::string line;
  std::size_t line_no = 0;
  std::size_t declared = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorKind::parse,
                  "score table line " + std::to_string(line_no) + ": not a JSON object");
    }
    if (line_no == 1) {
      if (!j.contains("method") || !j.contains("count") || !j["method"].is_string() ||
          !j["count"].is_number_unsigned()) {
        throw Error(ErrorKind::parse, "score table line 1: malformed header");
      }
      table.method = j["method"].get<std::string>();
      declared = j["count"].get<std::size_t>();
      continue;
    }
    if (!j.contains("id") || !j.contains("score") || !j["id"].is_string() ||
        !j["score"].is_number()) {
      throw Error(ErrorKind::parse,
                  "score table line " + std::to_string(line_no) + ": malformed entry");
    }
    double score = j["score"].get<double>();
    if (!std::isfinite(score)) {
      throw Error(ErrorKind::parse,
                  "score table line " + std::to_string(line_no) + ": non-finite score");
    }
    if (!table.entries.emplace(j["id"].get<std::string>(), score).second) {
      throw Error(ErrorKind::parse, "score table line " + std::to_string(line_no) +
                                        ": duplicate id \"" + j["id"].get<std::string>() + "\"");
    }
  }
  if (line_no == 0) throw Error(ErrorKind::parse, "score table is empty: " + path.string());
  if (table.entries.size() != declared) {
    throw Error(ErrorKind::parse, "score table header count " + std::to_string(declared) +
                                      " disagrees with " + std::to_string(table.entries.size()) +
                                      " entries");
  }
  return table;
}

void ScorerSpec::validate() const {
  switch (method) {
    case ScoreMethod::clip:
      if (embedders.size() != 1 || !embedders[0]) {
        throw Error(ErrorKind::validation, "clip scoring needs exactly one embedder");
      }
      break;
    case ScoreMethod::tmars:
      if (embedders.size() != 1 || !embedders[0]) {
        throw Error(ErrorKind::validation, "tmars scoring needs exactly one embedder");
      }
      if (!detector) {
        throw Error(ErrorKind::validation, "tmars scoring needs a text detector");
      }
      break;
    case ScoreMethod::cssft: {
      if (embedders.empty()) {
        throw Error(ErrorKind::validation, "cssft scoring needs at least one checkpoint");
      }
      std::uint32_t d = embedders[0] ? embedders[0]->dim() : 0;
      for (const auto& e : embedders) {
        if (!e || (e->dim() != 0 && d != 0 && e->dim() != d)) {
          throw Error(ErrorKind::validation, "cssft checkpoints must share one dim");
        }
      }
      break;
    }
    case ScoreMethod::crho:
      if (embedders.size() != 2 || !embedders[0] || !embedders[1]) {
        throw Error(ErrorKind::validation,
                    "crho scoring needs exactly two embedders (train, validation)");
      }
      break;
  }
}

namespace {

[[noreturn]] void rethrow_with_sample(const Error& e, const std::string& id) {
  throw Error(e.kind(), std::string(e.what()) + " (sample \"" + id + "\")");
}

}  // namespace

double clip_score(const SampleRecord& record, const Image& image,
                  const EmbeddingProvider& provider) {
  EmbedContext ctx{record.id};
  try {
    auto img_vec = provider.embed_image(image, ctx);
    auto txt_vec = provider.embed_text(record.caption, ctx);
    return cosine_similarity(img_vec, txt_vec);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::provider) rethrow_with_sample(e, record.id);
    throw;
  }
}

double tmars_score(const SampleRecord& record, const Image& image,
                   const DetectorProvider& detector, const EmbeddingProvider& provider) {
  std::vector<TextBox> boxes;
  try {
    boxes = detector.detect(image, record);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("text detection failed: ") + e.what() +
                              " (sample \"" + record.id + "\")");
  }
  Image masked = mask_image(image, boxes);
  return clip_score(record, masked, provider);
}

double cssft_score(const SampleRecord& record, const Image& image,
                   const std::vector<std::shared_ptr<const EmbeddingProvider>>& checkpoints) {
  if (checkpoints.empty()) {
    throw Error(ErrorKind::validation, "cssft needs at least one checkpoint");
  }
  double sum = 0.0;
  for (const auto& ck : checkpoints) sum += clip_score(record, image, *ck);
  return sum / static_cast<double>(checkpoints.size());
}

double crho_score(const SampleRecord& record, const Image& image,
                  const EmbeddingProvider& train_provider,
                  const EmbeddingProvider& val_provider) {
  return clip_score(record, image, val_provider) - clip_score(record, image, train_provider);
}

namespace {

double score_one(const SampleRecord& record, const Image& image, const ScorerSpec& spec) {
  switch (spec.method) {
    case ScoreMethod::clip:
      return clip_score(record, image, *spec.embedders[0]);
    case ScoreMethod::tmars:
      return tmars_score(record, image, *spec.detector, *spec.embedders[0]);
    case ScoreMethod::cssft:
      return cssft_score(record, image, spec.embedders);
    case ScoreMethod::crho:
      return crho_score(record, image, *spec.embedders[0], *spec.embedders[1]);
  }
  throw Error(ErrorKind::validation, "unknown score method");
}

}  // namespace

ScoreTable score_manifest(const std::vector<SampleRecord>& records,
                          const ImageSource& images, const ScorerSpec& spec,
                          int workers) {
  spec.validate();
  if (workers < 1) throw Error(ErrorKind::validation, "worker count must be >= 1");

  bool serialize_provider = false;
  for (const auto& e : spec.embedders) {
    if (e->max_concurrency() == 1) serialize_provider = true;
  }

  std::vector<double> results(records.size(), 0.0);
  std::vector<std::string> failures(records.size());
  std::atomic<std::size_t> cursor{0};
  std::mutex provider_mutex;

  auto worker_fn = [&] {
    for (;;) {
      std::size_t i = cursor.fetch_add(1);
      if (i >= records.size()) return;
      const auto& rec = records[i];
      try {
        Image image = decode_image(images.read_bytes(rec.image_ref));
        if (serialize_provider) {
          std::lock_guard<std::mutex> lock(provider_mutex);
          results[i] = score_one(rec, image, spec);
        } else {
          results[i] = score_one(rec, image, spec);
        }
      } catch (const std::exception& e) {
        failures[i] = e.what();
        if (failures[i].empty()) failures[i] = "unknown error";
      }
    }
  };

  if (workers == 1) {
    worker_fn();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
    for (auto& t : pool) t.join();
  }

  std::vector<std::string> failed_ids;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!failures[i].empty()) failed_ids.push_back(records[i].id);
  }
  if (!failed_ids.empty()) {
    throw AggregateError("scoring failed", std::move(failed_ids));
  }

  ScoreTable table;
  table.method = score_method_name(spec.method);
  for (std::size_t i = 0; i < records.size(); ++i) {
    table.entries[records[i].id] = results[i];
  }
  if (table.entries.size() != records.size()) {
    throw Error(ErrorKind::validation, "records contain duplicate ids");
  }
  return table;
}

}  // namespace tmars
