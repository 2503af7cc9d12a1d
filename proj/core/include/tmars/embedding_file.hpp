#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tmars {

/// Row-major matrix of unit-norm float32 embeddings with an id -> row index.
/// On disk: magic "TMEB", version 0x01, dim u32 LE, count u64 LE, payload of
/// count*dim little-endian IEEE-754 floats, plus a "<path>.idx.jsonl" sidecar
/// of {"id": str, "row": n} lines with rows contiguous from 0.
struct EmbeddingMatrix {
  std::uint32_t dim = 0;
  std::vector<float> values;  // count * dim
  std::map<std::string, std::uint64_t> row_index;

  std::uint64_t count() const {
    return dim == 0 ? 0 : static_cast<std::uint64_t>(values.size()) / dim;
  }
  const float* row(std::uint64_t r) const { return values.data() + r * dim; }

  /// Throws unless rows are unit norm (within 1e-3) and row_index is a
  /// bijection onto [0, count).
  void validate() const;
};

void write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

}  // namespace tmars
