#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tmars {

/// Decoded 8-bit RGB image, row-major, no padding.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3 bytes

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  bool empty() const { return width == 0 || height == 0; }

  std::uint8_t* at(int x, int y) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = at(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Decodes PNG or JPEG bytes (sniffed from the magic) into RGB8.
Image decode_image(std::span<const std::uint8_t> bytes);

/// Encodes RGB8 as PNG. Deterministic: fixed filter and compression settings,
/// no ancillary chunks.
std::vector<std::uint8_t> encode_png(const Image& image);

Image load_image_file(const std::filesystem::path& path);
void save_png_file(const Image& image, const std::filesystem::path& path);

/// Resolves an image_ref to raw encoded bytes. Implementations must be safe
/// for concurrent reads.
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual std::vector<std::uint8_t> read_bytes(const std::string& image_ref) const = 0;
};

/// Reads image_refs as paths relative to a root directory. Refs must be
/// relative and must not escape the root.
class DirImageSource : public ImageSource {
 public:
  explicit DirImageSource(std::filesystem::path root);
  std::vector<std::uint8_t> read_bytes(const std::string& image_ref) const override;

 private:
  std::filesystem::path root_;
};

/// Reads image_refs as member names of an uncompressed POSIX tar shard.
class TarImageSource : public ImageSource {
 public:
  explicit TarImageSource(std::filesystem::path tar_path);
  std::vector<std::uint8_t> read_bytes(const std::string& image_ref) const override;

 private:
  struct Member {
    std::uint64_t offset;
    std::uint64_t size;
  };
  std::filesystem::path tar_path_;
  std::map<std::string, Member> members_;
};

/// Picks DirImageSource for directories and TarImageSource for .tar files.
std::unique_ptr<ImageSource> open_image_source(const std::filesystem::path& path);

}  // namespace tmars
