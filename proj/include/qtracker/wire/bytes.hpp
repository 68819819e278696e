#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qtracker::wire {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

/// Raised by every wire decoder. `offset` is relative to the start of the
/// buffer handed to the top-level parse call.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : std::runtime_error(what + " at offset " + std::to_string(offset)),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

std::string to_hex(ByteSpan data);
Bytes from_hex(std::string_view hex);

inline ByteSpan as_span(const Bytes& b) { return {b.data(), b.size()}; }
inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

/// Bounds-checked big-endian cursor over a byte span.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan data, std::size_t base_offset = 0)
      : data_(data), base_(base_offset) {}

  std::size_t offset() const noexcept { return base_ + pos_; }
  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool empty() const noexcept { return pos_ == data_.size(); }

  std::uint8_t peek_u8() const;
  std::uint8_t read_u8();
  std::uint64_t read_uint(std::size_t width);
  std::uint32_t read_u32() { return static_cast<std::uint32_t>(read_uint(4)); }
  ByteSpan read_span(std::size_t n);
  Bytes read_bytes(std::size_t n);
  ByteSpan rest();
  void skip(std::size_t n) { (void)read_span(n); }

  /// Reads a QUIC varint; `minimal` reports whether the encoding was the
  /// shortest possible for the decoded value.
  std::uint64_t read_varint(bool* minimal = nullptr);

 private:
  void need(std::size_t n, const char* what) const;

  ByteSpan data_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void uint(std::uint64_t v, std::size_t width);
  void u32(std::uint32_t v) { uint(v, 4); }
  void bytes(ByteSpan b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void varint(std::uint64_t v);
  void varint(std::uint64_t v, std::size_t width);
  void zeros(std::size_t n) { out_.insert(out_.end(), n, 0); }

  std::size_t size() const noexcept { return out_.size(); }
  Bytes& buffer() noexcept { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

}  // namespace qtracker::wire
