#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tmars/types.hpp"

namespace tmars {

/// Reads a UTF-8 JSONL manifest. Records come back in file order; ids are
/// verified unique and non-empty. Malformed lines report 1-based line numbers.
std::vector<SampleRecord> read_manifest(const std::filesystem::path& path);

/// Writes records as JSONL with the canonical field order
/// (id, image_ref, caption, boxes, tags_visual, tags_text, scores); absent
/// optional fields are omitted. Output is byte-deterministic; score values are
/// quantized to 9 significant digits.
void write_manifest(const std::vector<SampleRecord>& records,
                    const std::filesystem::path& path);

/// Serializes one record to its canonical JSON line (no trailing newline).
std::string record_to_json_line(const SampleRecord& record);

/// Reads a webdataset-style uncompressed tar of <stem>.jpg|.png + <stem>.txt
/// pairs. One record per stem, sorted ascending by stem; captions have a
/// single trailing newline stripped. Unpaired stems are an error.
std::vector<SampleRecord> read_shard(const std::filesystem::path& path);

/// Merges records from several shards. Stems that collide across shards are
/// disambiguated by prefixing "<shard-filename>/" to the colliding ids.
std::vector<SampleRecord> merge_shards(const std::vector<std::filesystem::path>& paths);

}  // namespace tmars
