#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "tmars/embedder.hpp"
#include "tmars/image.hpp"
#include "tmars/masking.hpp"
#include "tmars/rng.hpp"
#include "tmars/types.hpp"

namespace tmars {

// Tag strips: a 2-pixel-high machine-decodable barcode standing in for
// rendered text / visual content in synthetic fixtures. Layout per strip:
// 4 sync columns (white, black, white, black), then 32 bits MSB-first at
// 2 columns per bit; bit 1 = (255,255,255), bit 0 = (0,0,0). 68 columns total.
constexpr int kStripWidth = 68;
constexpr int kStripHeight = 2;

/// Renders one tag id as a 68x2 pixel block.
Image encode_tag_strip(std::uint32_t tag_id);

/// Copies a tag strip into an image at (x, y). The strip must fit.
void write_tag_strip(Image& image, int x, int y, std::uint32_t tag_id);

/// Scans every adjacent row pair for sync prefixes and returns all decoded
/// ids. A column reads white/black only when both of its pixels agree
/// (luminance >= 128 is white); anything mixed rejects the candidate.
std::set<std::uint32_t> decode_tag_strips(const Image& image);

/// Appendix-style caption template, verbatim and unescaped.
std::string render_caption(const std::string& title, const std::string& metadata);

// Built-in word lists backing the synthetic corpora. Content words carry tag
// ids equal to their list position; distractor words follow them and are
// 5-gram-disjoint from everything that can appear in a caption; filler words
// pad metadata and carry no tags.
const std::vector<std::string>& content_words();
const std::vector<std::string>& distractor_words();
const std::vector<std::string>& filler_words();

/// word -> tag id for content and distractor words (fillers are untagged).
const TagVocab& builtin_vocab();

/// One generated source example before any category variant is applied: a
/// solid background with the caption's tags (plus optional unrelated noise
/// tags) written as visual strips on rows 0-1.
struct SourceExample {
  std::string id;
  std::string title_word;
  std::vector<std::string> tagged_words;  // title first
  std::string caption;
  std::vector<std::uint32_t> caption_tags;  // tags of tagged_words, same order
  std::vector<std::uint32_t> noise_tags;    // deduplicated, unrelated to caption
  Rgb background;
  Image image;
};

std::vector<SourceExample> make_sources(std::size_t count, std::uint64_t seed);

/// A finished synthetic sample: record + rendered image + ground-truth
/// category and readable in-image text.
struct PoolSample {
  SampleRecord record;
  Image image;
  Category category;
  std::vector<std::string> ocr;  // words readable in the image, if any
  std::string source_id;
};

/// Applies one category variant to a source example. S_i keeps the image;
/// S_irt / S_it add a text strip inside a recorded box; S_r / S_t swap in a
/// distractor image (S_t additionally overlays the caption's tags as a
/// full-width text banner across the reserved strip rows). The returned
/// record's boxes/tags fields are ground truth for the emitted image.
PoolSample overlay_variant(const SourceExample& source, Category category,
                           std::uint64_t seed);

/// Appendix-style pool construction parameters: 40% base, 20% negative
/// sources emitting two copies (S_r, S_t), 40% positive sources emitting
/// three copies (S_i, S_irt, S_it).
struct PoolSpec {
  double base_fraction = 0.40;
  double negative_fraction = 0.20;
  double positive_fraction = 0.40;
  int copies_negative = 2;
  int copies_positive = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Builds the utility-experiment pool. Sources are shuffled by seed before
/// the 40/20/40 split; sibling variants share the source id prefix of their
/// record ids ("<source>-<category>").
std::vector<PoolSample> build_pools(const std::vector<SourceExample>& base, const PoolSpec& spec);

/// Per-category sample counts for a pilot corpus of `total` samples using the
/// observed category proportions (largest-remainder rounding, ties broken in
/// category declaration order).
std::vector<std::size_t> pilot_counts(std::size_t total);

/// Builds a pilot-study corpus: `total` samples with the observed category
/// proportions, categories assigned to sources by a seeded shuffle.
std::vector<PoolSample> build_pilot(std::size_t total, std::uint64_t seed);

/// Writes a synthetic corpus: manifest.jsonl, categories.jsonl, ocr.jsonl and
/// PNGs under pool/<category>/<id>.png, all relative to out_dir.
void write_pool(const std::vector<PoolSample>& samples,
                const std::filesystem::path& out_dir);

/// One measured point of the utility experiment.
struct UtilityPoint {
  std::uint64_t added_samples = 0;
  double accuracy = 0.0;  // percentage in [0, 100]
};

/// Ordinary least-squares slope of accuracy against added samples in
/// millions. Needs >= 2 points with distinct x.
double utility_slope(const std::vector<UtilityPoint>& points);

}  // namespace tmars
