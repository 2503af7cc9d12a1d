#include "tmars/image.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <jpeglib.h>
#include <png.h>

#include "tmars/error.hpp"
#include "tar_internal.hpp"

namespace tmars {
namespace {

struct PngReadState {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + n > st->size) {
    png_error(png, "unexpected end of PNG stream");
  }
  std::memcpy(out, st->data + st->pos, n);
  st->pos += n;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void png_flush_noop(png_structp) {}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorKind::io, "libpng allocation failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorKind::io, "libpng allocation failure");
  }

  Image image;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::parse, "malformed PNG data");
  }

  PngReadState state{bytes.data(), bytes.size(), 0};
  png_set_read_fn(png, &state, png_read_from_memory);
  png_read_info(png, info);

  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

  // Normalize every input to 8-bit RGB.
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  image = Image(static_cast<int>(w), static_cast<int>(h));
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = image.at(0, static_cast<int>(y));
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

Image decode_jpeg(std::span<const std::uint8_t> bytes) {
  struct ErrMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
  } err;

  jpeg_decompress_struct cinfo;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = [](j_common_ptr info) {
    auto* mgr = reinterpret_cast<ErrMgr*>(info->err);
    std::longjmp(mgr->jump, 1);
  };

  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::parse, "malformed JPEG data");
  }

  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  Image image(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = image.at(0, static_cast<int>(cinfo.output_scanline));
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return image;
}

}  // namespace

Image decode_image(std::span<const std::uint8_t> bytes) {
  static const std::uint8_t kPngMagic[4] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kPngMagic, 4) == 0) {
    return decode_png(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8) {
    return decode_jpeg(bytes);
  }
  throw Error(ErrorKind::parse, "unrecognized image format (expected PNG or JPEG)");
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  if (image.empty() || image.pixels.size() !=
                           static_cast<std::size_t>(image.width) * image.height * 3) {
    throw Error(ErrorKind::validation, "cannot encode empty or inconsistent image");
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorKind::io, "libpng allocation failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorKind::io, "libpng allocation failure");
  }

  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::io, "PNG encode failure");
  }

  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  // Fixed settings keep the encoding byte-deterministic.
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.at(0, y)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Image load_image_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open image file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_image(bytes);
}

void save_png_file(const Image& image, const std::filesystem::path& path) {
  auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

DirImageSource::DirImageSource(std::filesystem::path root) : root_(std::move(root)) {}

std::vector<std::uint8_t> DirImageSource::read_bytes(const std::string& image_ref) const {
  std::filesystem::path ref(image_ref);
  if (ref.is_absolute()) {
    throw Error(ErrorKind::validation, "image_ref must be relative: " + image_ref);
  }
  for (const auto& part : ref) {
    if (part == "..") {
      throw Error(ErrorKind::validation, "image_ref escapes image root: " + image_ref);
    }
  }
  std::filesystem::path full = root_ / ref;
  std::ifstream in(full, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open image: " + full.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

TarImageSource::TarImageSource(std::filesystem::path tar_path)
    : tar_path_(std::move(tar_path)) {
  for (const auto& entry : detail::list_tar_members(tar_path_)) {
    members_[entry.name] = Member{entry.offset, entry.size};
  }
}

std::vector<std::uint8_t> TarImageSource::read_bytes(const std::string& image_ref) const {
  auto it = members_.find(image_ref);
  if (it == members_.end()) {
    throw Error(ErrorKind::io, "tar member not found: " + image_ref);
  }
  return detail::read_tar_payload(tar_path_, it->second.offset, it->second.size);
}

std::unique_ptr<ImageSource> open_image_source(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) {
    return std::make_unique<DirImageSource>(path);
  }
  if (std::filesystem::is_regular_file(path) && path.extension() == ".tar") {
    return std::make_unique<TarImageSource>(path);
  }
  throw Error(ErrorKind::validation,
              "image root must be a directory or a .tar shard: " + path.string());
}

}  // namespace tmars
