#pragma once

#include <map>
#include <optional>

#include "qtracker/wire/bytes.hpp"

namespace qtracker::conn {

/// Receive side of a stream: delivers bytes in offset order, dropping
/// duplicates and overlaps (the first copy of a byte wins).
class StreamReassembler {
 public:
  /// Returns the number of bytes newly appended to the contiguous prefix.
  std::size_t insert(std::uint64_t offset, wire::ByteSpan data, bool fin);

  const wire::Bytes& contiguous() const { return data_; }
  std::optional<std::uint64_t> final_size() const { return final_size_; }
  bool complete() const { return final_size_ && data_.size() == *final_size_; }
  /// Largest offset + length seen in any frame.
  std::uint64_t highest_offset() const { return highest_; }
  std::size_t buffered_segments() const { return pending_.size(); }

 private:
  wire::Bytes data_;
  std::map<std::uint64_t, wire::Bytes> pending_;
  std::optional<std::uint64_t> final_size_;
  std::uint64_t highest_ = 0;
};

struct StreamState {
  StreamReassembler recv;
  std::uint64_t send_offset = 0;
  std::uint64_t send_limit = 0;  // advertised by the peer
  std::uint64_t recv_limit = 0;  // advertised by us
  bool fin_sent = false;
};

}  // namespace qtracker::conn
