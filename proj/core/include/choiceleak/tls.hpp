#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace choiceleak {

enum class Direction : std::uint8_t { ClientToServer, ServerToClient };

namespace content_type {
inline constexpr std::uint8_t kChangeCipherSpec = 20;
inline constexpr std::uint8_t kAlert = 21;
inline constexpr std::uint8_t kHandshake = 22;
inline constexpr std::uint8_t kApplicationData = 23;
}  // namespace content_type

inline constexpr std::size_t kRecordHeaderLen = 5;
inline constexpr std::uint32_t kMaxRecordLen = 16384;

struct TlsRecord {
  std::uint64_t t_us = 0;
  Direction dir = Direction::ClientToServer;
  std::uint8_t ctype = content_type::kApplicationData;
  std::uint16_t len = 0;

  bool operator==(const TlsRecord&) const = default;
};

inline bool is_valid_content_type(std::uint8_t ctype) {
  return ctype >= content_type::kChangeCipherSpec && ctype <= content_type::kApplicationData;
}

/// Maps byte offsets of a reassembled stream to the capture time of the
/// packet that delivered them. Marks must be added in increasing offset order.
class ByteTimeline {
 public:
  ByteTimeline() = default;
  explicit ByteTimeline(std::uint64_t constant_t_us) { mark(0, constant_t_us); }

  void mark(std::size_t offset, std::uint64_t t_us);
  std::uint64_t at(std::size_t offset) const;
  bool empty() const { return marks_.empty(); }

 private:
  std::vector<std::pair<std::size_t, std::uint64_t>> marks_;
};

struct RecordParse {
  std::vector<TlsRecord> records;
  std::size_t consumed = 0;  ///< sum of (5 + len) over parsed records
  std::size_t residue = 0;   ///< bytes left unparsed; consumed + residue == stream size
  /// Set when a record boundary held a byte outside 20..23 or a length above
  /// 16384; parsing stopped there.
  std::optional<std::size_t> invalid_offset;
};

/// Greedy left-to-right parse of consecutive TLS records in one direction of
/// one connection. A trailing incomplete record is counted as residue.
RecordParse extract_tls_records(std::span<const std::uint8_t> stream, const ByteTimeline& times,
                                Direction dir = Direction::ClientToServer);

}  // namespace choiceleak
