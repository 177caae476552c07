#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gaprouter/common/error.hpp"

namespace gaprouter {

/// Appends doubles as little-endian IEEE-754 binary64.
inline void append_f64le(std::string& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

inline void append_f64le(std::string& out, std::span<const double> values) {
  out.reserve(out.size() + values.size() * 8);
  for (double v : values) append_f64le(out, v);
}

/// Sequential reader over a little-endian f64 payload.
class F64Reader {
 public:
  explicit F64Reader(std::string&&) = delete;
  explicit F64Reader(std::string_view bytes) : bytes_(bytes) {
    if (bytes_.size() % 8 != 0) throw BundleError("payload length is not a multiple of 8");
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return (bytes_.size() - pos_) / 8; }

  double next() {
    if (pos_ + 8 > bytes_.size()) throw BundleError("payload truncated");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  /// Reads a value that was stored as a double but must be a small
  /// non-negative integer.
  std::size_t next_count(std::size_t limit = std::size_t{1} << 40) {
    const double v = next();
    if (!(v >= 0.0) || v != static_cast<double>(static_cast<std::uint64_t>(v)) ||
        v > static_cast<double>(limit)) {
      throw BundleError("corrupt integer field in payload");
    }
    return static_cast<std::size_t>(v);
  }

  std::vector<double> next_vector(std::size_t n) {
    if (n > remaining()) throw BundleError("payload truncated");
    std::vector<double> out(n);
    for (auto& v : out) v = next();
    return out;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace gaprouter
