#pragma once

#include <cstddef>
#include <cstdint>

#include "qtracker/wire/bytes.hpp"

namespace qtracker::wire {

inline constexpr std::uint64_t kMaxVarint = (std::uint64_t{1} << 62) - 1;

struct DecodedVarint {
  std::uint64_t value = 0;
  std::size_t consumed = 0;
  bool minimal = true;

  bool operator==(const DecodedVarint&) const = default;
};

/// Smallest of 1, 2, 4 or 8 bytes able to hold `value`.
std::size_t varint_size(std::uint64_t value);

/// Minimal encoding. Throws std::range_error above kMaxVarint.
Bytes encode_varint(std::uint64_t value);

/// Encoding forced to `width` bytes (1, 2, 4 or 8), possibly non-minimal.
Bytes encode_varint(std::uint64_t value, std::size_t width);

/// Throws ParseError on an empty buffer or one shorter than the prefix-declared
/// length.
DecodedVarint decode_varint(ByteSpan buf);

}  // namespace qtracker::wire
