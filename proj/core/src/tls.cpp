#include "choiceleak/tls.hpp"

#include <algorithm>

namespace choiceleak {

void ByteTimeline::mark(std::size_t offset, std::uint64_t t_us) {
  if (!marks_.empty() && marks_.back().first == offset) {
    marks_.back().second = t_us;
    return;
  }
  marks_.emplace_back(offset, t_us);
}

std::uint64_t ByteTimeline::at(std::size_t offset) const {
  if (marks_.empty()) return 0;
  auto it = std::upper_bound(marks_.begin(), marks_.end(), offset,
                             [](std::size_t off, const auto& m) { return off < m.first; });
  if (it == marks_.begin()) return marks_.front().second;
  return std::prev(it)->second;
}

RecordParse extract_tls_records(std::span<const std::uint8_t> stream, const ByteTimeline& times, Direction dir) {
  RecordParse out;
  std::size_t off = 0;
  while (stream.size() - off >= kRecordHeaderLen) {
    const std::uint8_t ctype = stream[off];
    const std::uint32_t len = (std::uint32_t{stream[off + 3]} << 8) | stream[off + 4];
    if (!is_valid_content_type(ctype) || len > kMaxRecordLen) {
      out.invalid_offset = off;
      break;
    }
    if (stream.size() - off - kRecordHeaderLen < len) break;
    out.records.push_back({times.at(off), dir, ctype, static_cast<std::uint16_t>(len)});
    off += kRecordHeaderLen + len;
  }
  out.consumed = off;
  out.residue = stream.size() - off;
  return out;
}

}  // namespace choiceleak
