#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace tmars {

/// 64-bit FNV-1a over raw bytes.
inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  return fnv1a64(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

/// SplitMix64 stream. Bit-stable across platforms; used everywhere a seeded
/// stream is needed so outputs never depend on the standard library's
/// distribution implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of randomness.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

 private:
  std::uint64_t state_;
};

/// Independent stream for (seed, label). Label-derived so per-record streams
/// cannot collide or depend on visit order.
inline SplitMix64 derive_stream(std::uint64_t seed, std::string_view label) {
  unsigned char prefix[8];
  for (int i = 0; i < 8; ++i) prefix[i] = static_cast<unsigned char>(seed >> (8 * i));
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : prefix) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  for (unsigned char b : std::span<const unsigned char>(
           reinterpret_cast<const unsigned char*>(label.data()), label.size())) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return SplitMix64(h);
}

}  // namespace tmars
