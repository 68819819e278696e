#include "qtracker/conn/stream.hpp"

#include <algorithm>

namespace qtracker::conn {

std::size_t StreamReassembler::insert(std::uint64_t offset, wire::ByteSpan data, bool fin) {
  const std::uint64_t end = offset + data.size();
  highest_ = std::max(highest_, end);
  if (fin && !final_size_) final_size_ = end;

  const std::size_t before = data_.size();
  if (end > data_.size()) {
    // Trim the part already delivered.
    const std::uint64_t skip = offset < data_.size() ? data_.size() - offset : 0;
    const std::uint64_t start = offset + skip;
    auto& slot = pending_[start];
    if (slot.size() < data.size() - skip) slot.assign(data.begin() + static_cast<std::ptrdiff_t>(skip), data.end());
  }
  while (!pending_.empty() && pending_.begin()->first <= data_.size()) {
    const auto [start, bytes] = *pending_.begin();
    pending_.erase(pending_.begin());
    const std::uint64_t seg_end = start + bytes.size();
    if (seg_end > data_.size()) {
      data_.insert(data_.end(), bytes.begin() + static_cast<std::ptrdiff_t>(data_.size() - start),
                   bytes.end());
    }
  }
  return data_.size() - before;
}

}  // namespace qtracker::conn
