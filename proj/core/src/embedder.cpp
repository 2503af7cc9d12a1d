#include "tmars/embedder.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <mutex>

#include "httplib.h"
#include "json.hpp"

#include "tmars/embedding_file.hpp"
#include "tmars/error.hpp"
#include "tmars/rng.hpp"
#include "tmars/synth.hpp"

namespace tmars {

double cosine_similarity(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size() || u.empty()) {
    throw Error(ErrorKind::validation, "cosine_similarity: dimension mismatch");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * v[i];
    nu += static_cast<double>(u[i]) * u[i];
    nv += static_cast<double>(v[i]) * v[i];
  }
  if (nu == 0.0 || nv == 0.0) {
    throw Error(ErrorKind::validation, "cosine_similarity: zero vector");
  }
  double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::min(1.0, std::max(-1.0, c));
}

std::vector<float> mock_embed(std::span<const unsigned char> bytes, std::uint32_t dim) {
  if (dim < 2) throw Error(ErrorKind::validation, "mock_embed: dim must be >= 2");
  std::uint64_t seed = fnv1a64(bytes);
  for (;;) {
    SplitMix64 stream(seed);
    std::vector<double> comps(dim);
    double sq = 0.0;
    for (std::uint32_t j = 0; j < dim; ++j) {
      double c = 2.0 * (static_cast<double>(stream.next_u64() >> 11) * 0x1.0p-53) - 1.0;
      comps[j] = c;
      sq += c * c;
    }
    if (sq > 0.0) {
      double inv = 1.0 / std::sqrt(sq);
      std::vector<float> out(dim);
      for (std::uint32_t j = 0; j < dim; ++j) out[j] = static_cast<float>(comps[j] * inv);
      return out;
    }
    ++seed;  // all-zero draw; practically unreachable
  }
}

MockEmbedder::MockEmbedder(std::uint32_t dim, std::string salt)
    : dim_(dim), salt_(std::move(salt)) {
  if (dim_ < 2) throw Error(ErrorKind::validation, "mock embedder dim must be >= 2");
}

namespace {

void append_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

}  // namespace

std::vector<float> MockEmbedder::embed_image(const Image& image, const EmbedContext&) const {
  std::vector<unsigned char> framed;
  framed.reserve(image.pixels.size() + salt_.size() + 16);
  const char* tag = "img\0";
  framed.insert(framed.end(), tag, tag + 4);
  framed.insert(framed.end(), salt_.begin(), salt_.end());
  framed.push_back(0);
  append_u32(framed, static_cast<std::uint32_t>(image.width));
  append_u32(framed, static_cast<std::uint32_t>(image.height));
  framed.insert(framed.end(), image.pixels.begin(), image.pixels.end());
  return mock_embed(framed, dim_);
}

std::vector<float> MockEmbedder::embed_text(std::string_view caption, const EmbedContext&) const {
  std::vector<unsigned char> framed;
  framed.reserve(caption.size() + salt_.size() + 8);
  const char* tag = "txt\0";
  framed.insert(framed.end(), tag, tag + 4);
  framed.insert(framed.end(), salt_.begin(), salt_.end());
  framed.push_back(0);
  framed.insert(framed.end(), caption.begin(), caption.end());
  return mock_embed(framed, dim_);
}

std::vector<float> tag_indicator(const std::vector<std::uint32_t>& tags) {
  std::vector<float> v(kTagBuckets, 0.0f);
  std::size_t hit = 0;
  for (std::uint32_t t : tags) {
    std::uint32_t bucket = t % kTagBuckets;
    if (v[bucket] == 0.0f) {
      v[bucket] = 1.0f;
      ++hit;
    }
  }
  if (hit == 0) {
    v[kTagSentinelBucket] = 1.0f;
    return v;
  }
  float inv = 1.0f / std::sqrt(static_cast<float>(hit));
  for (auto& x : v) x *= inv;
  return v;
}

TagEmbedder::TagEmbedder(TagVocab vocab) : vocab_(std::move(vocab)) {}

std::vector<float> TagEmbedder::embed_image(const Image& image, const EmbedContext&) const {
  auto ids = decode_tag_strips(image);
  return tag_indicator(std::vector<std::uint32_t>(ids.begin(), ids.end()));
}

std::vector<float> TagEmbedder::embed_text(std::string_view caption, const EmbedContext&) const {
  std::vector<std::uint32_t> tags;
  std::string token;
  auto flush = [&] {
    if (!token.empty()) {
      auto it = vocab_.find(token);
      if (it != vocab_.end()) tags.push_back(it->second);
      token.clear();
    }
  };
  for (char ch : caption) {
    if (std::isalpha(static_cast<unsigned char>(ch))) {
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else {
      flush();
    }
  }
  flush();
  return tag_indicator(tags);
}

struct FileEmbedder::Data {
  EmbeddingMatrix images;
  EmbeddingMatrix texts;
};

FileEmbedder::FileEmbedder(const std::string& prefix) {
  auto data = std::make_shared<Data>();
  data->images = read_embeddings(prefix + ".img.temb");
  data->texts = read_embeddings(prefix + ".txt.temb");
  if (data->images.dim != data->texts.dim) {
    throw Error(ErrorKind::validation,
                "file embedder towers disagree on dim: " + prefix);
  }
  dim_ = data->images.dim;
  data_ = std::move(data);
}

namespace {

std::vector<float> lookup_row(const EmbeddingMatrix& m, const std::string& id,
                              const char* tower) {
  auto it = m.row_index.find(id);
  if (it == m.row_index.end()) {
    throw Error(ErrorKind::provider,
                std::string("no precomputed ") + tower + " embedding for sample \"" + id + "\"");
  }
  const float* p = m.row(it->second);
  return std::vector<float>(p, p + m.dim);
}

}  // namespace

std::vector<float> FileEmbedder::embed_image(const Image&, const EmbedContext& ctx) const {
  return lookup_row(data_->images, ctx.sample_id, "image");
}

std::vector<float> FileEmbedder::embed_text(std::string_view, const EmbedContext& ctx) const {
  return lookup_row(data_->texts, ctx.sample_id, "text");
}

std::string base64_encode(std::span<const unsigned char> bytes) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= bytes.size()) {
    std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out.push_back(alphabet[v & 63]);
    i += 3;
  }
  std::size_t rem = bytes.size() - i;
  if (rem == 1) {
    std::uint32_t v = bytes[i] << 16;
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back('=');
    out.push_back('=');
  } else if (rem == 2) {
    std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

struct HttpEmbedder::Impl {
  std::string host;
  int port = 80;
  std::string base_path;
  mutable std::mutex mutex;
  mutable std::uint32_t dim = 0;  // inferred from the first response
};

namespace {

void parse_http_url(const std::string& url, std::string& host, int& port, std::string& path) {
  std::string rest = url;
  const std::string scheme = "http://";
  if (rest.rfind(scheme, 0) != 0) {
    throw Error(ErrorKind::validation, "http embedder expects an http:// URL: " + url);
  }
  rest = rest.substr(scheme.size());
  auto slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  path = slash == std::string::npos ? "" : rest.substr(slash);
  if (!path.empty() && path.back() == '/') path.pop_back();
  auto colon = hostport.find(':');
  if (colon == std::string::npos) {
    host = hostport;
    port = 80;
  } else {
    host = hostport.substr(0, colon);
    port = std::atoi(hostport.c_str() + colon + 1);
  }
  if (host.empty() || port <= 0) {
    throw Error(ErrorKind::validation, "malformed embedder URL: " + url);
  }
}

std::vector<float> parse_embed_response(const nlohmann::json& j, std::uint32_t& dim) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("embedding") ||
      !j["dim"].is_number_unsigned() || !j["embedding"].is_array()) {
    throw Error(ErrorKind::provider, "malformed embedding response");
  }
  std::uint32_t got = j["dim"].get<std::uint32_t>();
  if (j["embedding"].size() != got) {
    throw Error(ErrorKind::provider, "embedding response length disagrees with dim");
  }
  if (dim == 0) {
    dim = got;
  } else if (dim != got) {
    throw Error(ErrorKind::provider, "embedding dim changed across responses");
  }
  std::vector<float> v;
  v.reserve(got);
  double sq = 0.0;
  for (const auto& x : j["embedding"]) {
    if (!x.is_number()) throw Error(ErrorKind::provider, "non-numeric embedding component");
    double d = x.get<double>();
    sq += d * d;
    v.push_back(static_cast<float>(d));
  }
  double norm = std::sqrt(sq);
  if (std::abs(norm - 1.0) > 1e-3) {
    throw Error(ErrorKind::provider, "remote embedding is not unit norm");
  }
  for (auto& x : v) x = static_cast<float>(x / norm);
  return v;
}

}  // namespace

HttpEmbedder::HttpEmbedder(const std::string& url) : impl_(std::make_unique<Impl>()) {
  parse_http_url(url, impl_->host, impl_->port, impl_->base_path);
}

HttpEmbedder::~HttpEmbedder() = default;

std::uint32_t HttpEmbedder::dim() const {
  std::lock_guard<std::mutex> lock(impl_->mutex);
  return impl_->dim;
}

namespace {

nlohmann::json post_json(const HttpEmbedder::BatchItem& item) {
  return nlohmann::json{{"kind", item.kind}, {"data_b64", item.data_b64}};
}

}  // namespace

std::vector<std::vector<float>> HttpEmbedder::embed_batch(
    const std::vector<BatchItem>& items) const {
  std::lock_guard<std::mutex> lock(impl_->mutex);
  httplib::Client client(impl_->host, impl_->port);
  client.set_read_timeout(30, 0);

  nlohmann::json body = nlohmann::json::array();
  for (const auto& item : items) body.push_back(post_json(item));

  auto res = client.Post((impl_->base_path + "/v1/embed_batch").c_str(), body.dump(),
                         "application/json");
  if (!res || res->status != 200) {
    throw Error(ErrorKind::provider,
                "embed_batch request failed" +
                    (res ? " with status " + std::to_string(res->status) : ""));
  }
  nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.is_array() || j.size() != items.size()) {
    throw Error(ErrorKind::provider, "malformed embed_batch response");
  }
  std::vector<std::vector<float>> out;
  out.reserve(items.size());
  for (const auto& item : j) out.push_back(parse_embed_response(item, impl_->dim));
  return out;
}

namespace {

std::vector<float> http_embed_one(const std::string& host, int port,
                                  const std::string& base_path, const std::string& kind,
                                  const std::string& b64, std::uint32_t& dim) {
  httplib::Client client(host, port);
  client.set_read_timeout(30, 0);
  nlohmann::json body{{"kind", kind}, {"data_b64", b64}};
  auto res = client.Post((base_path + "/v1/embed").c_str(), body.dump(), "application/json");
  if (!res || res->status != 200) {
    throw Error(ErrorKind::provider,
                "embed request failed" +
                    (res ? " with status " + std::to_string(res->status) : ""));
  }
  nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::provider, "malformed embedding response");
  return parse_embed_response(j, dim);
}

}  // namespace

std::vector<float> HttpEmbedder::embed_image(const Image& image, const EmbedContext&) const {
  auto png = encode_png(image);
  std::lock_guard<std::mutex> lock(impl_->mutex);
  return http_embed_one(impl_->host, impl_->port, impl_->base_path, "image",
                        base64_encode(png), impl_->dim);
}

std::vector<float> HttpEmbedder::embed_text(std::string_view caption, const EmbedContext&) const {
  std::lock_guard<std::mutex> lock(impl_->mutex);
  return http_embed_one(
      impl_->host, impl_->port, impl_->base_path, "text",
      base64_encode(std::span<const unsigned char>(
          reinterpret_cast<const unsigned char*>(caption.data()), caption.size())),
      impl_->dim);
}

std::shared_ptr<EmbeddingProvider> make_embedder(const std::string& spec) {
  if (spec == "mock") return std::make_shared<MockEmbedder>();
  if (spec.rfind("mock:", 0) == 0) {
    return std::make_shared<MockEmbedder>(64, spec.substr(5));
  }
  if (spec == "tag") return std::make_shared<TagEmbedder>(builtin_vocab());
  if (spec.rfind("file=", 0) == 0) {
    return std::make_shared<FileEmbedder>(spec.substr(5));
  }
  if (spec.rfind("http=", 0) == 0) {
    return std::make_shared<HttpEmbedder>(spec.substr(5));
  }
  if (spec == "http") {
    const char* url = std::getenv("TMARS_EMBED_URL");
    if (!url || !*url) {
      throw Error(ErrorKind::validation,
                  "embedder \"http\" requires TMARS_EMBED_URL or http=<url>");
    }
    return std::make_shared<HttpEmbedder>(url);
  }
  throw Error(ErrorKind::validation,
              "unknown embedder \"" + spec + "\" (expected mock|mock:<salt>|tag|file=<prefix>|http=<url>)");
}

}  // namespace tmars
