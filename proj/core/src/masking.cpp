#include "tmars/masking.hpp"

#include <algorithm>
#include <cstdint>
#include <tuple>

#include "tmars/error.hpp"

namespace tmars {
namespace {

bool inside_any(const std::vector<TextBox>& boxes, int x, int y) {
  for (const auto& b : boxes) {
    if (b.contains(x, y)) return true;
  }
  return false;
}

Rgb mean_half_up(std::uint64_t sum_r, std::uint64_t sum_g, std::uint64_t sum_b,
                 std::uint64_t count) {
  auto div = [count](std::uint64_t s) {
    return static_cast<std::uint8_t>((2 * s + count) / (2 * count));
  };
  return Rgb{div(sum_r), div(sum_g), div(sum_b)};
}

}  // namespace

std::optional<TextBox> clamp_box(const TextBox& box, int width, int height) {
  TextBox c;
  c.x_min = std::max(box.x_min, 0);
  c.y_min = std::max(box.y_min, 0);
  c.x_max = std::min(box.x_max, width);
  c.y_max = std::min(box.y_max, height);
  if (c.x_min >= c.x_max || c.y_min >= c.y_max) return std::nullopt;
  return c;
}

Rgb border_ring_mean(const Image& image, const TextBox& box,
                     const std::vector<TextBox>& all_boxes) {
  std::uint64_t sr = 0, sg = 0, sb = 0, n = 0;
  auto consider = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= image.width || y >= image.height) return;
    if (inside_any(all_boxes, x, y)) return;
    const auto* p = image.at(x, y);
    sr += p[0];
    sg += p[1];
    sb += p[2];
    ++n;
  };

  for (int x = box.x_min - 1; x <= box.x_max; ++x) {
    consider(x, box.y_min - 1);
    consider(x, box.y_max);
  }
  for (int y = box.y_min; y < box.y_max; ++y) {
    consider(box.x_min - 1, y);
    consider(box.x_max, y);
  }
  if (n > 0) return mean_half_up(sr, sg, sb, n);

  // Ring fully covered: fall back to the mean over everything outside every box.
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      if (inside_any(all_boxes, x, y)) continue;
      const auto* p = image.at(x, y);
      sr += p[0];
      sg += p[1];
      sb += p[2];
      ++n;
    }
  }
  if (n > 0) return mean_half_up(sr, sg, sb, n);
  return Rgb{128, 128, 128};
}

Image mask_image(const Image& image, const std::vector<TextBox>& boxes) {
  std::vector<TextBox> clamped;
  for (const auto& b : boxes) {
    if (auto c = clamp_box(b, image.width, image.height)) clamped.push_back(*c);
  }
  if (clamped.empty()) return image;

  // Canonical order: ascending (y_min, x_min, y_max, x_max).
  std::sort(clamped.begin(), clamped.end(), [](const TextBox& a, const TextBox& b) {
    return std::tie(a.y_min, a.x_min, a.y_max, a.x_max) <
           std::tie(b.y_min, b.x_min, b.y_max, b.x_max);
  });

  // All fill colors come from the original pixels, never from applied fills.
  std::vector<Rgb> fills;
  fills.reserve(clamped.size());
  for (const auto& b : clamped) fills.push_back(border_ring_mean(image, b, clamped));

  Image out = image;
  // Painting in reverse canonical order leaves the first containing box's
  // fill on top wherever boxes overlap.
  for (std::size_t i = clamped.size(); i-- > 0;) {
    const auto& b = clamped[i];
    const auto& f = fills[i];
    for (int y = b.y_min; y < b.y_max; ++y) {
      for (int x = b.x_min; x < b.x_max; ++x) {
        out.set(x, y, f.r, f.g, f.b);
      }
    }
  }
  return out;
}

std::vector<TextBox> OracleDetector::detect(const Image& image,
                                            const SampleRecord& record) const {
  if (!record.boxes) {
    throw Error(ErrorKind::validation,
                "record \"" + record.id + "\" has no text-box annotations");
  }
  std::vector<TextBox> out;
  for (const auto& b : *record.boxes) {
    if (auto c = clamp_box(b, image.width, image.height)) out.push_back(*c);
  }
  return out;
}

}  // namespace tmars
