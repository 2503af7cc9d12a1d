#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tmars/embedder.hpp"
#include "tmars/image.hpp"
#include "tmars/masking.hpp"
#include "tmars/types.hpp"

namespace tmars {

enum class ScoreMethod { clip, tmars, cssft, crho };

const char* score_method_name(ScoreMethod m);
std::optional<ScoreMethod> score_method_from_name(const std::string& name);

/// Mapping from sample id to one named scalar score.
struct ScoreTable {
  std::string method;
  std::map<std::string, double> entries;  // canonical: ascending id
};

/// JSONL persistence: header line {"method": str, "count": n}, then one
/// {"id": str, "score": number} line per entry in ascending id order. Scores
/// carry 9 significant digits.
void write_score_table(const ScoreTable& table, const std::filesystem::path& path);
ScoreTable read_score_table(const std::filesystem::path& path);

/// Which scorer to run and with what collaborators: one embedder for
/// clip/tmars (tmars also needs a detector), the checkpoint sequence for
/// cssft, and {train, validation} for crho.
struct ScorerSpec {
  ScoreMethod method = ScoreMethod::clip;
  std::vector<std::shared_ptr<const EmbeddingProvider>> embedders;
  std::shared_ptr<const DetectorProvider> detector;

  void validate() const;
};

/// Cosine similarity between the image and caption embeddings.
double clip_score(const SampleRecord& record, const Image& image,
                  const EmbeddingProvider& provider);

/// clip_score of the masked image against the original caption.
double tmars_score(const SampleRecord& record, const Image& image,
                   const DetectorProvider& detector, const EmbeddingProvider& provider);

/// Mean image-caption similarity across fine-tuning checkpoints. The mean
/// ranks identically to the summed form for a fixed checkpoint count.
double cssft_score(const SampleRecord& record, const Image& image,
                   const std::vector<std::shared_ptr<const EmbeddingProvider>>& checkpoints);

/// Validation-model similarity minus train-model similarity.
double crho_score(const SampleRecord& record, const Image& image,
                  const EmbeddingProvider& train_provider,
                  const EmbeddingProvider& val_provider);

/// Scores every record. Per-sample failures are collected into one
/// AggregateError and no table is produced. Output is independent of the
/// worker count.
ScoreTable score_manifest(const std::vector<SampleRecord>& records,
                          const ImageSource& images, const ScorerSpec& spec,
                          int workers = 1);

}  // namespace tmars
