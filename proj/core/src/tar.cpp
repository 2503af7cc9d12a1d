#include "tar_internal.hpp"

#include <cstring>
#include <fstream>

#include "tmars/error.hpp"

namespace tmars::detail {
namespace {

constexpr std::size_t kBlock = 512;

std::uint64_t parse_octal(const char* field, std::size_t len) {
  std::uint64_t value = 0;
  std::size_t i = 0;
  while (i < len && (field[i] == ' ' || field[i] == '\0')) ++i;
  for (; i < len; ++i) {
    char c = field[i];
    if (c == ' ' || c == '\0') break;
    if (c < '0' || c > '7') {
      throw Error(ErrorKind::parse, "invalid octal field in tar header");
    }
    value = value * 8 + static_cast<std::uint64_t>(c - '0');
  }
  return value;
}

bool all_zero(const char* block) {
  for (std::size_t i = 0; i < kBlock; ++i) {
    if (block[i] != 0) return false;
  }
  return true;
}

}  // namespace

std::vector<TarEntry> list_tar_members(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open tar archive: " + path.string());

  std::vector<TarEntry> entries;
  char block[kBlock];
  std::uint64_t offset = 0;

  while (in.read(block, kBlock)) {
    offset += kBlock;
    if (all_zero(block)) break;  // end-of-archive marker

    char name_field[101] = {0};
    std::memcpy(name_field, block, 100);
    char prefix_field[156] = {0};
    std::memcpy(prefix_field, block + 345, 155);

    std::string name;
    bool is_ustar = std::memcmp(block + 257, "ustar", 5) == 0;
    if (is_ustar && prefix_field[0] != '\0') {
      name = std::string(prefix_field) + "/" + name_field;
    } else {
      name = name_field;
    }

    std::uint64_t size = parse_octal(block + 124, 12);
    char typeflag = block[156];

    if (typeflag == '0' || typeflag == '\0') {
      entries.push_back(TarEntry{name, offset, size});
    }

    std::uint64_t padded = (size + kBlock - 1) / kBlock * kBlock;
    in.seekg(static_cast<std::streamoff>(padded), std::ios::cur);
    offset += padded;
    if (!in) {
      throw Error(ErrorKind::parse, "truncated tar archive: " + path.string());
    }
  }
  return entries;
}

std::vector<std::uint8_t> read_tar_payload(const std::filesystem::path& path,
                                           std::uint64_t offset, std::uint64_t size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open tar archive: " + path.string());
  in.seekg(static_cast<std::streamoff>(offset));
  std::vector<std::uint8_t> payload(size);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(size));
  if (static_cast<std::uint64_t>(in.gcount()) != size) {
    throw Error(ErrorKind::parse, "truncated tar member payload in " + path.string());
  }
  return payload;
}

}  // namespace tmars::detail
