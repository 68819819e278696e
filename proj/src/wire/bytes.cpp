#include "qtracker/wire/bytes.hpp"

#include "qtracker/wire/varint.hpp"

namespace qtracker::wire {

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string to_hex(ByteSpan data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
  if (hex.size() % 2 != 0) {
    throw std::invalid_argument("odd-length hex string");
  }
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = hex_value(hex[i]);
    int lo = hex_value(hex[i + 1]);
    if (hi < 0 || lo < 0) {
      throw std::invalid_argument("invalid hex digit");
    }
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return out;
}

void ByteReader::need(std::size_t n, const char* what) const {
  if (remaining() < n) {
    throw ParseError(offset(), std::string("truncated ") + what + ": need " +
                                   std::to_string(n) + " bytes, have " +
                                   std::to_string(remaining()));
  }
}

std::uint8_t ByteReader::peek_u8() const {
  need(1, "byte");
  return data_[pos_];
}

std::uint8_t ByteReader::read_u8() {
  need(1, "byte");
  return data_[pos_++];
}

std::uint64_t ByteReader::read_uint(std::size_t width) {
  need(width, "integer");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v = v << 8 | data_[pos_ + i];
  pos_ += width;
  return v;
}

ByteSpan ByteReader::read_span(std::size_t n) {
  need(n, "field");
  auto s = data_.subspan(pos_, n);
  pos_ += n;
  return s;
}

Bytes ByteReader::read_bytes(std::size_t n) {
  auto s = read_span(n);
  return Bytes(s.begin(), s.end());
}

ByteSpan ByteReader::rest() { return read_span(remaining()); }

std::uint64_t ByteReader::read_varint(bool* minimal) {
  need(1, "varint");
  need(std::size_t{1} << (data_[pos_] >> 6), "varint");
  auto decoded = decode_varint(data_.subspan(pos_));
  pos_ += decoded.consumed;
  if (minimal) *minimal = decoded.minimal;
  return decoded.value;
}

void ByteWriter::uint(std::uint64_t v, std::size_t width) {
  for (std::size_t i = width; i > 0; --i) {
    out_.push_back(static_cast<std::uint8_t>(v >> (8 * (i - 1))));
  }
}

void ByteWriter::varint(std::uint64_t v) { bytes(encode_varint(v)); }

void ByteWriter::varint(std::uint64_t v, std::size_t width) {
  bytes(encode_varint(v, width));
}

}  // namespace qtracker::wire
