#include "tmars/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "tmars/error.hpp"
#include "tmars/manifest.hpp"
#include "tmars/taxonomy.hpp"

namespace tmars {
namespace {

constexpr int kSourceWidth = 476;
constexpr int kSourceHeight = 64;

// S_irt / S_it text boxes sit safely below the reserved visual strip rows.
constexpr TextBox kInlineBox{8, 16, 80, 26};
// The S_t banner spans the full width across the reserved rows.
constexpr int kBannerHeight = 8;

bool column_white(const Image& img, int x, int y) {
  const auto* a = img.at(x, y);
  const auto* b = img.at(x, y + 1);
  int la = a[0] + a[1] + a[2];
  int lb = b[0] + b[1] + b[2];
  return la >= 384 && lb >= 384;
}

bool column_black(const Image& img, int x, int y) {
  const auto* a = img.at(x, y);
  const auto* b = img.at(x, y + 1);
  int la = a[0] + a[1] + a[2];
  int lb = b[0] + b[1] + b[2];
  return la < 384 && lb < 384;
}

}  // namespace

Image encode_tag_strip(std::uint32_t tag_id) {
  Image strip(kStripWidth, kStripHeight);
  auto paint = [&strip](int x, bool white) {
    std::uint8_t v = white ? 255 : 0;
    strip.set(x, 0, v, v, v);
    strip.set(x, 1, v, v, v);
  };
  paint(0, true);
  paint(1, false);
  paint(2, true);
  paint(3, false);
  for (int bit = 0; bit < 32; ++bit) {
    bool one = (tag_id >> (31 - bit)) & 1u;
    paint(4 + 2 * bit, one);
    paint(4 + 2 * bit + 1, one);
  }
  return strip;
}

void write_tag_strip(Image& image, int x, int y, std::uint32_t tag_id) {
  if (x < 0 || y < 0 || x + kStripWidth > image.width || y + kStripHeight > image.height) {
    throw Error(ErrorKind::validation, "tag strip does not fit at the requested position");
  }
  Image strip = encode_tag_strip(tag_id);
  for (int row = 0; row < kStripHeight; ++row) {
    const auto* src = strip.at(0, row);
    auto* dst = image.at(x, y + row);
    std::copy(src, src + kStripWidth * 3, dst);
  }
}

std::set<std::uint32_t> decode_tag_strips(const Image& image) {
  std::set<std::uint32_t> ids;
  if (image.width < kStripWidth || image.height < kStripHeight) return ids;

  for (int y = 0; y + 1 < image.height; ++y) {
    int x = 0;
    while (x + kStripWidth <= image.width) {
      if (!(column_white(image, x, y) && column_black(image, x + 1, y) &&
            column_white(image, x + 2, y) && column_black(image, x + 3, y))) {
        ++x;
        continue;
      }
      // Candidate sync: read 32 bits, each 2 columns that must agree.
      std::uint32_t value = 0;
      bool ok = true;
      for (int bit = 0; bit < 32 && ok; ++bit) {
        int cx = x + 4 + 2 * bit;
        bool w1 = column_white(image, cx, y);
        bool b1 = column_black(image, cx, y);
        bool w2 = column_white(image, cx + 1, y);
        bool b2 = column_black(image, cx + 1, y);
        if ((w1 && w2)) {
          value = (value << 1) | 1u;
        } else if (b1 && b2) {
          value <<= 1;
        } else {
          ok = false;
        }
      }
      if (ok) {
        ids.insert(value);
        x += kStripWidth;
      } else {
        ++x;
      }
    }
  }
  return ids;
}

std::string render_caption(const std::string& title, const std::string& metadata) {
  return "Title: " + title + " | Metadata: " + metadata;
}

const std::vector<std::string>& content_words() {
  static const std::vector<std::string> words = {
      // 40 long words (>= 5 chars)...
      "golden", "retriever", "vintage", "bottle", "castle", "garden", "sunset",
      "mountain", "harbor", "bridge", "forest", "meadow", "orchid", "falcon",
      "lantern", "violin", "marble", "copper", "willow", "ember", "saffron",
      "juniper", "basalt", "harvest", "lagoon", "granite", "velvet", "cascade",
      "prairie", "compass", "anchor", "beacon", "timber", "quartz", "maple",
      "cedar", "heron", "otter", "plume", "raven",
      // ...and 8 short ones that a 5-character text matcher cannot see.
      "fox", "owl", "cat", "elk", "bee", "ram", "ivy", "koi"};
  return words;
}

const std::vector<std::string>& distractor_words() {
  // Overlay text that must never 5-gram-match a caption; verified by test.
  static const std::vector<std::string> words = {
      "zorvyx", "quibzel", "vexjaw", "wyzkin", "jaqtyx", "kvuzol",
      "xylquz", "yvzork", "qwexib", "zujfyk", "kyxvun", "jwozix"};
  return words;
}

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "series", "random", "sample", "poster", "print",  "photo",
      "stock",  "image",  "classic", "limited", "edition", "gallery"};
  return words;
}

const TagVocab& builtin_vocab() {
  static const TagVocab vocab = [] {
    TagVocab v;
    std::uint32_t next = 0;
    for (const auto& w : content_words()) v[w] = next++;
    for (const auto& w : distractor_words()) v[w] = next++;
    return v;
  }();
  return vocab;
}

namespace {

std::string source_label(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%05zu", index);
  return buf;
}

constexpr std::uint32_t kNoiseTagBase = 1024;
constexpr std::uint32_t kNoiseTagSpan = 2970;  // stays clear of the sentinel bucket

Rgb random_background(SplitMix64& rng) {
  auto ch = [&rng] { return static_cast<std::uint8_t>(40 + rng.next_below(160)); };
  return Rgb{ch(), ch(), ch()};
}

void fill_rect(Image& img, int x0, int y0, int x1, int y1, Rgb c) {
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) img.set(x, y, c.r, c.g, c.b);
  }
}

}  // namespace

std::vector<SourceExample> make_sources(std::size_t count, std::uint64_t seed) {
  const auto& content = content_words();
  const auto& filler = filler_words();

  std::vector<SourceExample> sources;
  sources.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SourceExample src;
    src.id = source_label(i);
    SplitMix64 rng = derive_stream(seed, "source/" + src.id);

    std::size_t k = 1 + rng.next_below(3);
    std::vector<std::size_t> picks;
    while (picks.size() < k) {
      std::size_t idx = rng.next_below(content.size());
      if (std::find(picks.begin(), picks.end(), idx) == picks.end()) picks.push_back(idx);
    }
    for (std::size_t idx : picks) {
      src.tagged_words.push_back(content[idx]);
      src.caption_tags.push_back(static_cast<std::uint32_t>(idx));
    }
    src.title_word = src.tagged_words[0];

    std::size_t filler_count = 1 + rng.next_below(2);
    std::vector<std::string> metadata(src.tagged_words.begin() + 1, src.tagged_words.end());
    std::vector<std::size_t> filler_picks;
    while (filler_picks.size() < filler_count) {
      std::size_t idx = rng.next_below(filler.size());
      if (std::find(filler_picks.begin(), filler_picks.end(), idx) == filler_picks.end()) {
        filler_picks.push_back(idx);
        metadata.push_back(filler[idx]);
      }
    }
    std::string joined;
    for (std::size_t m = 0; m < metadata.size(); ++m) {
      if (m) joined += ", ";
      joined += metadata[m];
    }
    src.caption = render_caption(src.title_word, joined);

    std::size_t noise_count = rng.next_below(k + 1);
    std::set<std::uint32_t> noise;
    while (noise.size() < noise_count) {
      noise.insert(kNoiseTagBase + static_cast<std::uint32_t>(rng.next_below(kNoiseTagSpan)));
    }
    src.noise_tags.assign(noise.begin(), noise.end());

    src.background = random_background(rng);
    src.image = Image(kSourceWidth, kSourceHeight);
    fill_rect(src.image, 0, 0, kSourceWidth, kSourceHeight, src.background);
    int col = 0;
    for (std::uint32_t tag : src.caption_tags) {
      write_tag_strip(src.image, col * kStripWidth, 0, tag);
      ++col;
    }
    for (std::uint32_t tag : src.noise_tags) {
      write_tag_strip(src.image, col * kStripWidth, 0, tag);
      ++col;
    }
    sources.push_back(std::move(src));
  }
  return sources;
}

namespace {

std::vector<std::uint32_t> sorted_unique(std::vector<std::uint32_t> tags) {
  std::sort(tags.begin(), tags.end());
  tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
  return tags;
}

}  // namespace

PoolSample overlay_variant(const SourceExample& source, Category category,
                           std::uint64_t seed) {
  SplitMix64 rng =
      derive_stream(seed, "variant/" + source.id + "/" + category_name(category));

  PoolSample sample;
  sample.category = category;
  sample.source_id = source.id;
  sample.record.id = source.id + "-" + category_name(category);
  sample.record.caption = source.caption;

  std::vector<std::uint32_t> base_visual = source.caption_tags;
  base_visual.insert(base_visual.end(), source.noise_tags.begin(), source.noise_tags.end());

  switch (category) {
    case Category::S_i: {
      sample.image = source.image;
      sample.record.boxes = std::vector<TextBox>{};
      sample.record.tags_visual = sorted_unique(base_visual);
      sample.record.tags_text = std::vector<std::uint32_t>{};
      break;
    }
    case Category::S_irt: {
      const auto& words = distractor_words();
      std::size_t pick = rng.next_below(words.size());
      std::uint32_t tag = builtin_vocab().at(words[pick]);
      sample.image = source.image;
      write_tag_strip(sample.image, kInlineBox.x_min, kInlineBox.y_min, tag);
      sample.record.boxes = std::vector<TextBox>{kInlineBox};
      sample.record.tags_visual = sorted_unique(base_visual);
      sample.record.tags_text = std::vector<std::uint32_t>{tag};
      sample.ocr.push_back(words[pick]);
      break;
    }
    case Category::S_it: {
      std::uint32_t tag = source.caption_tags[0];  // the title's tag
      sample.image = source.image;
      write_tag_strip(sample.image, kInlineBox.x_min, kInlineBox.y_min, tag);
      sample.record.boxes = std::vector<TextBox>{kInlineBox};
      sample.record.tags_visual = sorted_unique(base_visual);
      sample.record.tags_text = std::vector<std::uint32_t>{tag};
      sample.ocr.push_back(source.title_word);
      break;
    }
    case Category::S_r:
    case Category::S_t: {
      // Distractor: a fresh solid background with unrelated visual tags.
      Rgb bg = random_background(rng);
      std::size_t tag_count = 1 + rng.next_below(2);
      std::set<std::uint32_t> tags;
      while (tags.size() < tag_count) {
        tags.insert(kNoiseTagBase + static_cast<std::uint32_t>(rng.next_below(kNoiseTagSpan)));
      }
      sample.image = Image(kSourceWidth, kSourceHeight);
      fill_rect(sample.image, 0, 0, kSourceWidth, kSourceHeight, bg);
      int col = 0;
      for (std::uint32_t tag : tags) write_tag_strip(sample.image, col++ * kStripWidth, 0, tag);

      if (category == Category::S_r) {
        sample.record.boxes = std::vector<TextBox>{};
        sample.record.tags_visual =
            std::vector<std::uint32_t>(tags.begin(), tags.end());
        sample.record.tags_text = std::vector<std::uint32_t>{};
      } else {
        // The caption-text banner covers the reserved strip rows, replacing
        // the distractor's visual strips with the caption's tags.
        fill_rect(sample.image, 0, 0, kSourceWidth, kBannerHeight, bg);
        int tcol = 0;
        for (std::uint32_t tag : source.caption_tags) {
          write_tag_strip(sample.image, tcol++ * kStripWidth, 0, tag);
        }
        sample.record.boxes =
            std::vector<TextBox>{TextBox{0, 0, kSourceWidth, kBannerHeight}};
        sample.record.tags_visual = std::vector<std::uint32_t>{};
        sample.record.tags_text = sorted_unique(source.caption_tags);
        sample.ocr = source.tagged_words;
      }
      break;
    }
  }

  sample.record.image_ref = std::string("pool/") + category_name(category) + "/" +
                            sample.record.id + ".png";
  return sample;
}

void PoolSpec::validate() const {
  if (std::abs(base_fraction + negative_fraction + positive_fraction - 1.0) > 1e-9) {
    throw Error(ErrorKind::validation, "pool fractions must sum to 1.0");
  }
  if (base_fraction < 0 || negative_fraction < 0 || positive_fraction < 0) {
    throw Error(ErrorKind::validation, "pool fractions must be non-negative");
  }
  if (copies_negative < 1 || copies_positive < 1) {
    throw Error(ErrorKind::validation, "pool copy counts must be >= 1");
  }
}

std::vector<PoolSample> build_pools(const std::vector<SourceExample>& base,
                                    const PoolSpec& spec) {
  spec.validate();
  if (base.size() < 10) {
    throw Error(ErrorKind::validation, "pool construction needs at least 10 base records");
  }

  std::size_t n = base.size();
  auto count_of = [n](double fraction) {
    return static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(n) + 1e-9));
  };
  std::size_t n_base = count_of(0.0 + spec.base_fraction);
  std::size_t n_neg = count_of(0.0 + spec.negative_fraction);

  // Seeded role assignment: shuffle indices, then split 40/20/40.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng = derive_stream(spec.seed, "pool-split");
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = rng.next_below(i);
    std::swap(order[i - 1], order[j]);
  }
  enum class Role { base, negative, positive };
  std::vector<Role> roles(n, Role::positive);
  for (std::size_t i = 0; i < n_base; ++i) roles[order[i]] = Role::base;
  for (std::size_t i = n_base; i < n_base + n_neg; ++i) roles[order[i]] = Role::negative;

  std::vector<PoolSample> samples;
  for (std::size_t i = 0; i < n; ++i) {
    switch (roles[i]) {
      case Role::base:
        samples.push_back(overlay_variant(base[i], Category::S_i, spec.seed));
        break;
      case Role::negative:
        samples.push_back(overlay_variant(base[i], Category::S_r, spec.seed));
        samples.push_back(overlay_variant(base[i], Category::S_t, spec.seed));
        break;
      case Role::positive:
        samples.push_back(overlay_variant(base[i], Category::S_i, spec.seed));
        samples.push_back(overlay_variant(base[i], Category::S_irt, spec.seed));
        samples.push_back(overlay_variant(base[i], Category::S_it, spec.seed));
        break;
    }
  }
  return samples;
}

std::vector<std::size_t> pilot_counts(std::size_t total) {
  static const double fractions[] = {0.037, 0.467, 0.098, 0.191, 0.207};
  std::vector<std::size_t> counts(5, 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < 5; ++c) {
    double exact = fractions[c] * static_cast<double>(total);
    counts[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += counts[c];
    remainders.push_back({exact - std::floor(exact + 1e-9), c});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i) {
    counts[remainders[i % 5].second] += 1;
    ++assigned;
  }
  return counts;
}

std::vector<PoolSample> build_pilot(std::size_t total, std::uint64_t seed) {
  if (total == 0) {
    throw Error(ErrorKind::validation, "pilot corpus size must be > 0");
  }
  auto counts = pilot_counts(total);
  std::vector<Category> labels;
  labels.reserve(total);
  for (std::size_t c = 0; c < 5; ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) labels.push_back(kAllCategories[c]);
  }
  SplitMix64 rng = derive_stream(seed, "pilot-shuffle");
  for (std::size_t i = labels.size(); i > 1; --i) {
    std::size_t j = rng.next_below(i);
    std::swap(labels[i - 1], labels[j]);
  }

  auto sources = make_sources(total, seed);
  std::vector<PoolSample> samples;
  samples.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    samples.push_back(overlay_variant(sources[i], labels[i], seed));
  }
  return samples;
}

void write_pool(const std::vector<PoolSample>& samples,
                const std::filesystem::path& out_dir) {
  std::vector<const PoolSample*> sorted;
  sorted.reserve(samples.size());
  for (const auto& s : samples) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [](const PoolSample* a, const PoolSample* b) {
    return a->record.id < b->record.id;
  });

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  for (Category c : kAllCategories) {
    std::filesystem::create_directories(out_dir / "pool" / category_name(c), ec);
  }

  std::vector<SampleRecord> records;
  std::map<std::string, Category> categories;
  std::map<std::string, std::vector<std::string>> ocr;
  for (const auto* s : sorted) {
    records.push_back(s->record);
    categories[s->record.id] = s->category;
    ocr[s->record.id] = s->ocr;
    save_png_file(s->image, out_dir / s->record.image_ref);
  }
  write_manifest(records, out_dir / "manifest.jsonl");
  write_categories(categories, out_dir / "categories.jsonl");
  write_ocr_annotations(ocr, out_dir / "ocr.jsonl");
}

double utility_slope(const std::vector<UtilityPoint>& points) {
  if (points.size() < 2) {
    throw Error(ErrorKind::validation, "utility fit needs at least 2 points");
  }
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += static_cast<double>(p.added_samples) / 1e6;
    my += p.accuracy;
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());

  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    double dx = static_cast<double>(p.added_samples) / 1e6 - mx;
    sxx += dx * dx;
    sxy += dx * (p.accuracy - my);
  }
  if (sxx == 0.0) {
    throw Error(ErrorKind::validation, "utility fit is degenerate: all x values equal");
  }
  return sxy / sxx;
}

}  // namespace tmars
