#include "tmars/embedding_file.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"

#include "tmars/error.hpp"

namespace tmars {
namespace {

constexpr char kMagic[4] = {'T', 'M', 'E', 'B'};
constexpr std::uint8_t kVersion = 0x01;

static_assert(std::endian::native == std::endian::little,
              "embedding file I/O assumes a little-endian host");

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}

}  // namespace

void EmbeddingMatrix::validate() const {
  if (dim == 0) throw Error(ErrorKind::validation, "embedding matrix dim must be > 0");
  if (values.size() % dim != 0) {
    throw Error(ErrorKind::validation, "embedding payload is not a whole number of rows");
  }
  std::uint64_t n = count();
  if (row_index.size() != n) {
    throw Error(ErrorKind::validation, "row index size does not match row count");
  }
  std::vector<bool> hit(n, false);
  for (const auto& [id, r] : row_index) {
    if (r >= n || hit[r]) {
      throw Error(ErrorKind::validation,
                  "row index is not a bijection onto [0, count) at id \"" + id + "\"");
    }
    hit[r] = true;
  }
  for (std::uint64_t r = 0; r < n; ++r) {
    double sq = 0.0;
    const float* p = row(r);
    for (std::uint32_t j = 0; j < dim; ++j) sq += static_cast<double>(p[j]) * p[j];
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-3) {
      throw Error(ErrorKind::validation,
                  "row " + std::to_string(r) + " is not unit norm");
    }
  }
}

void write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  matrix.validate();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));
  put_u32(out, matrix.dim);
  put_u64(out, matrix.count());
  out.write(reinterpret_cast<const char*>(matrix.values.data()),
            static_cast<std::streamsize>(matrix.values.size() * sizeof(float)));
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
  out.close();

  // Sidecar rows are emitted in ascending row order for determinism.
  std::vector<const std::string*> by_row(matrix.count());
  for (const auto& [id, r] : matrix.row_index) by_row[r] = &id;
  std::filesystem::path idx_path = path;
  idx_path += ".idx.jsonl";
  std::ofstream idx(idx_path, std::ios::binary | std::ios::trunc);
  if (!idx) throw Error(ErrorKind::io, "cannot open for writing: " + idx_path.string());
  for (std::uint64_t r = 0; r < matrix.count(); ++r) {
    nlohmann::ordered_json j;
    j["id"] = *by_row[r];
    j["row"] = r;
    idx << j.dump() << '\n';
  }
  if (!idx) throw Error(ErrorKind::io, "write failed: " + idx_path.string());
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open embedding file: " + path.string());

  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorKind::parse, "bad magic bytes in embedding file: " + path.string());
  }
  char version = 0;
  in.get(version);
  if (!in || static_cast<std::uint8_t>(version) != kVersion) {
    throw Error(ErrorKind::parse, "unsupported embedding file version");
  }

  EmbeddingMatrix matrix;
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&matrix.dim), 4);
  in.read(reinterpret_cast<char*>(&count), 8);
  if (!in) throw Error(ErrorKind::parse, "truncated embedding file header");
  if (matrix.dim == 0) throw Error(ErrorKind::parse, "embedding file declares dim 0");

  // Check the physical size before allocating anything.
  std::uint64_t file_size = std::filesystem::file_size(path);
  unsigned __int128 expected_bytes =
      17 + static_cast<unsigned __int128>(count) * matrix.dim * sizeof(float);
  if (file_size < expected_bytes) {
    throw Error(ErrorKind::parse,
                "truncated embedding payload (header claims " + std::to_string(count) +
                    " rows): " + path.string());
  }
  if (file_size > expected_bytes) {
    throw Error(ErrorKind::parse, "trailing bytes after embedding payload: " + path.string());
  }

  std::uint64_t expected = count * matrix.dim;
  matrix.values.resize(expected);
  in.read(reinterpret_cast<char*>(matrix.values.data()),
          static_cast<std::streamsize>(expected * sizeof(float)));
  if (static_cast<std::uint64_t>(in.gcount()) != expected * sizeof(float)) {
    throw Error(ErrorKind::parse, "short read on embedding payload: " + path.string());
  }

  std::filesystem::path idx_path = path;
  idx_path += ".idx.jsonl";
  std::ifstream idx(idx_path, std::ios::binary);
  if (!idx) throw Error(ErrorKind::io, "cannot open embedding index: " + idx_path.string());
  std::string line;
  std::uint64_t expected_row = 0;
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("row") ||
        !j["id"].is_string() || !j["row"].is_number_unsigned()) {
      throw Error(ErrorKind::parse, "malformed embedding index line " +
                                        std::to_string(expected_row + 1));
    }
    std::uint64_t r = j["row"].get<std::uint64_t>();
    if (r != expected_row) {
      throw Error(ErrorKind::parse, "embedding index rows must be contiguous from 0");
    }
    if (!matrix.row_index.emplace(j["id"].get<std::string>(), r).second) {
      throw Error(ErrorKind::parse,
                  "duplicate id in embedding index: " + j["id"].get<std::string>());
    }
    ++expected_row;
  }
  if (expected_row != count) {
    throw Error(ErrorKind::parse, "embedding index has " + std::to_string(expected_row) +
                                      " rows, file claims " + std::to_string(count));
  }
  matrix.validate();
  return matrix;
}

}  // namespace tmars
