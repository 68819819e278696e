#include "qtracker/wire/varint.hpp"

#include <stdexcept>
#include <string>

namespace qtracker::wire {

std::size_t varint_size(std::uint64_t value) {
  if (value < (1u << 6)) return 1;
  if (value < (1u << 14)) return 2;
  if (value < (1u << 30)) return 4;
  if (value <= kMaxVarint) return 8;
  throw std::range_error("varint value " + std::to_string(value) +
                         " exceeds 2^62-1");
}

Bytes encode_varint(std::uint64_t value) {
  return encode_varint(value, varint_size(value));
}

Bytes encode_varint(std::uint64_t value, std::size_t width) {
  if (value > kMaxVarint) {
    throw std::range_error("varint value " + std::to_string(value) +
                           " exceeds 2^62-1");
  }
  std::uint8_t prefix = 0;
  switch (width) {
    case 1: prefix = 0; break;
    case 2: prefix = 1; break;
    case 4: prefix = 2; break;
    case 8: prefix = 3; break;
    default: throw std::invalid_argument("varint width must be 1, 2, 4 or 8");
  }
  if (width < 8 && value >= (std::uint64_t{1} << (8 * width - 2))) {
    throw std::range_error("varint value does not fit in " +
                           std::to_string(width) + " bytes");
  }
  Bytes out(width);
  for (std::size_t i = 0; i < width; ++i) {
    out[width - 1 - i] = static_cast<std::uint8_t>(value >> (8 * i));
  }
  out[0] |= static_cast<std::uint8_t>(prefix << 6);
  return out;
}

DecodedVarint decode_varint(ByteSpan buf) {
  if (buf.empty()) throw ParseError(0, "empty varint");
  const std::size_t width = std::size_t{1} << (buf[0] >> 6);
  if (buf.size() < width) {
    throw ParseError(0, "truncated varint: prefix declares " +
                            std::to_string(width) + " bytes, have " +
                            std::to_string(buf.size()));
  }
  std::uint64_t value = buf[0] & 0x3f;
  for (std::size_t i = 1; i < width; ++i) value = value << 8 | buf[i];
  return {value, width, varint_size(value) == width};
}

}  // namespace qtracker::wire
