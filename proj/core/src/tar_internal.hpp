#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tmars::detail {

struct TarEntry {
  std::string name;
  std::uint64_t offset;  // byte offset of the member payload
  std::uint64_t size;
};

/// Lists regular-file members of an uncompressed POSIX/ustar archive.
std::vector<TarEntry> list_tar_members(const std::filesystem::path& path);

/// Reads one member payload given its offset/size.
std::vector<std::uint8_t> read_tar_payload(const std::filesystem::path& path,
                                           std::uint64_t offset, std::uint64_t size);

}  // namespace tmars::detail
