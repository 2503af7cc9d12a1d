#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tmars {

/// Axis-aligned pixel rectangle, half-open on the max edges.
struct TextBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  bool valid() const { return x_min >= 0 && y_min >= 0 && x_min < x_max && y_min < y_max; }
  int width() const { return x_max - x_min; }
  int height() const { return y_max - y_min; }
  bool contains(int x, int y) const {
    return x >= x_min && x < x_max && y >= y_min && y < y_max;
  }

  friend bool operator==(const TextBox&, const TextBox&) = default;
  friend auto operator<=>(const TextBox&, const TextBox&) = default;
};

/// One image-caption pair. Optional fields are omitted from serialized
/// manifests when absent; tags_* carry ground truth for synthetic fixtures.
struct SampleRecord {
  std::string id;
  std::string image_ref;
  std::string caption;
  std::optional<std::vector<TextBox>> boxes;
  std::optional<std::vector<std::uint32_t>> tags_visual;
  std::optional<std::vector<std::uint32_t>> tags_text;
  std::optional<std::map<std::string, double>> scores;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

/// The five image-caption categories: mislabeled, visual-only, visual plus
/// random text, visual plus correlated text, text-only.
enum class Category { S_r, S_i, S_irt, S_it, S_t };

inline constexpr Category kAllCategories[] = {Category::S_r, Category::S_i,
                                              Category::S_irt, Category::S_it,
                                              Category::S_t};

const char* category_name(Category c);
std::optional<Category> category_from_name(const std::string& name);

/// Formats a double with 9 significant digits, the project-wide score
/// serialization precision.
std::string format_g9(double value);

/// Nearest double to format_g9(value); scores are stored at this resolution.
double quantize_g9(double value);

}  // namespace tmars
