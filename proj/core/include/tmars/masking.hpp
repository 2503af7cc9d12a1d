#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tmars/image.hpp"
#include "tmars/types.hpp"

namespace tmars {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Intersects a box with [0,width) x [0,height). Empty optional when the
/// intersection has zero area.
std::optional<TextBox> clamp_box(const TextBox& box, int width, int height);

/// Per-channel mean (rounded half-up) over the 1-pixel ring just outside
/// `box`, skipping ring pixels that fall inside any box in `all_boxes` or
/// outside the image. Falls back to the mean over all pixels outside every
/// box, then to mid-gray. Both box and all_boxes must already be clamped.
Rgb border_ring_mean(const Image& image, const TextBox& box,
                     const std::vector<TextBox>& all_boxes);

/// Fills every detected text region with the average surrounding color. Fill
/// colors are computed against the original image before any fill is applied,
/// so masking is idempotent and box-order independent; for overlapping boxes
/// the first box in canonical (y_min, x_min, y_max, x_max) order wins. Pixels
/// outside all boxes are untouched.
Image mask_image(const Image& image, const std::vector<TextBox>& boxes);

/// Supplies text boxes for an image. Returned boxes are clipped to the image.
class DetectorProvider {
 public:
  virtual ~DetectorProvider() = default;
  virtual std::vector<TextBox> detect(const Image& image, const SampleRecord& record) const = 0;
};

/// Reference provider: replays the record's ground-truth box annotations,
/// clamped to the image. Records without annotations are an error.
class OracleDetector : public DetectorProvider {
 public:
  std::vector<TextBox> detect(const Image& image, const SampleRecord& record) const override;
};

}  // namespace tmars
