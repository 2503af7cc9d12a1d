#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tmars/image.hpp"

namespace tmars {

double cosine_similarity(std::span<const float> u, std::span<const float> v);

/// Deterministic pseudo-embedding: FNV-1a64 seeds a SplitMix64 stream whose
/// outputs map to components in [-1, 1), then the vector is normalized.
/// Bit-identical across runs and platforms.
std::vector<float> mock_embed(std::span<const unsigned char> bytes, std::uint32_t dim);

/// Extra information available at scoring time. The file-backed provider is
/// keyed by sample id; content-addressed providers ignore it.
struct EmbedContext {
  std::string sample_id;
};

/// Two-tower embedding interface. Implementations must be deterministic
/// (equal inputs give bit-equal outputs) and must either be safe for
/// concurrent calls or report max_concurrency() == 1.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::uint32_t dim() const = 0;
  virtual std::vector<float> embed_image(const Image& image, const EmbedContext& ctx) const = 0;
  virtual std::vector<float> embed_text(std::string_view caption, const EmbedContext& ctx) const = 0;
  virtual int max_concurrency() const { return 0; }  // 0 = unbounded
};

/// Hash-based test double. An optional salt derives independent towers, used
/// to stand in for distinct training checkpoints.
class MockEmbedder : public EmbeddingProvider {
 public:
  explicit MockEmbedder(std::uint32_t dim = 64, std::string salt = "");
  std::uint32_t dim() const override { return dim_; }
  std::vector<float> embed_image(const Image& image, const EmbedContext& ctx) const override;
  std::vector<float> embed_text(std::string_view caption, const EmbedContext& ctx) const override;

 private:
  std::uint32_t dim_;
  std::string salt_;
};

using TagVocab = std::map<std::string, std::uint32_t>;

constexpr std::uint32_t kTagBuckets = 4096;
constexpr std::uint32_t kTagSentinelBucket = kTagBuckets - 1;

std::vector<float> tag_indicator(const std::vector<std::uint32_t>& tags);

/// Semantic test double over tag strips: the image tower decodes every tag
/// strip in the image, the text tower maps caption tokens through a vocab,
/// and both sides become L2-normalized indicators over 4096 buckets
/// (tag id mod 4096). An empty tag set maps to the reserved sentinel bucket.
class TagEmbedder : public EmbeddingProvider {
 public:
  explicit TagEmbedder(TagVocab vocab);
  std::uint32_t dim() const override { return kTagBuckets; }
  std::vector<float> embed_image(const Image& image, const EmbedContext& ctx) const override;
  std::vector<float> embed_text(std::string_view caption, const EmbedContext& ctx) const override;

  const TagVocab& vocab() const { return vocab_; }

 private:
  TagVocab vocab_;
};

/// Precomputed embeddings: "<prefix>.img.temb" and "<prefix>.txt.temb"
/// matrices (plus .idx.jsonl sidecars) looked up by sample id.
class FileEmbedder : public EmbeddingProvider {
 public:
  explicit FileEmbedder(const std::string& prefix);
  std::uint32_t dim() const override { return dim_; }
  std::vector<float> embed_image(const Image& image, const EmbedContext& ctx) const override;
  std::vector<float> embed_text(std::string_view caption, const EmbedContext& ctx) const override;

 private:
  struct Data;
  std::shared_ptr<const Data> data_;
  std::uint32_t dim_;
};

/// Client adapter for a remote embedding service:
///   POST <base>/v1/embed        {"kind": "image"|"text", "data_b64": str}
///     -> {"dim": n, "embedding": [..]}
///   POST <base>/v1/embed_batch  [request, ...] -> [response, ...] in order
/// Images are sent as base64 PNG, text as base64 UTF-8. Non-200 responses or
/// a dim change across calls are provider errors.
class HttpEmbedder : public EmbeddingProvider {
 public:
  explicit HttpEmbedder(const std::string& url);
  ~HttpEmbedder() override;

  std::uint32_t dim() const override;
  std::vector<float> embed_image(const Image& image, const EmbedContext& ctx) const override;
  std::vector<float> embed_text(std::string_view caption, const EmbedContext& ctx) const override;
  int max_concurrency() const override { return 1; }

  struct BatchItem {
    std::string kind;  // "image" or "text"
    std::string data_b64;
  };
  std::vector<std::vector<float>> embed_batch(const std::vector<BatchItem>& items) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string base64_encode(std::span<const unsigned char> bytes);

/// Parses an --embedder flag value: "mock", "mock:<salt>", "tag",
/// "file=<prefix>", "http=<url>", or "http" (TMARS_EMBED_URL).
std::shared_ptr<EmbeddingProvider> make_embedder(const std::string& spec);

}  // namespace tmars
