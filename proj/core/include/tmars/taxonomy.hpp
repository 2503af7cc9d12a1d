#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tmars/filtering.hpp"
#include "tmars/types.hpp"

namespace tmars {

/// Case-folds ASCII letters, collapses whitespace runs to single spaces and
/// trims the ends. Punctuation is preserved verbatim.
std::string normalize_text(const std::string& text);

/// True iff any 5 contiguous characters of any normalized OCR string occur in
/// the normalized caption.
bool text_match(const std::vector<std::string>& ocr_strings, const std::string& caption);

/// Annotated pair for classification: whether the visual content correlates
/// with the caption (a manual-judgement input, never computed here) plus the
/// text readable in the image.
struct AnnotatedPair {
  bool visual_correlated = false;
  std::vector<std::string> ocr_strings;
  std::string caption;
};

/// Five-way classification:
///   visual, no OCR            -> S_i
///   visual, OCR, no match     -> S_irt
///   visual, match             -> S_it
///   no visual, match          -> S_t
///   no visual, no match       -> S_r
Category classify_pair(const AnnotatedPair& pair);

/// Retains exactly the records whose in-image text does not match the
/// caption. Every record needs an OCR annotation.
RetentionSet text_match_filter(const std::vector<SampleRecord>& records,
                               const std::map<std::string, std::vector<std::string>>& ocr);

// File formats shared with other tools.
void write_categories(const std::map<std::string, Category>& categories,
                      const std::filesystem::path& path);
std::map<std::string, Category> read_categories(const std::filesystem::path& path);

void write_ocr_annotations(const std::map<std::string, std::vector<std::string>>& ocr,
                           const std::filesystem::path& path);
std::map<std::string, std::vector<std::string>> read_ocr_annotations(
    const std::filesystem::path& path);

}  // namespace tmars
