#include "tmars/types.hpp"

#include <cstdio>
#include <cstdlib>

namespace tmars {

const char* category_name(Category c) {
  switch (c) {
    case Category::S_r: return "S_r";
    case Category::S_i: return "S_i";
    case Category::S_irt: return "S_irt";
    case Category::S_it: return "S_it";
    case Category::S_t: return "S_t";
  }
  return "?";
}

std::optional<Category> category_from_name(const std::string& name) {
  for (Category c : kAllCategories) {
    if (name == category_name(c)) return c;
  }
  return std::nullopt;
}

std::string format_g9(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

double quantize_g9(double value) {
  return std::strtod(format_g9(value).c_str(), nullptr);
}

}  // namespace tmars
