#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace gaprouter {

/// Lower-case hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 of a file's contents; throws Error if unreadable.
std::string sha256_file(const std::string& path);

/// 64-bit FNV-1a. Stable across platforms, used where a cheap deterministic
/// hash of short strings is needed (shingles, seeding).
constexpr std::uint64_t fnv1a64(std::string_view s,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Combines a seed with a sequence of string parts into one 64-bit value.
std::uint64_t mix_seed(std::uint64_t seed, std::span<const std::string_view> parts);

}  // namespace gaprouter
