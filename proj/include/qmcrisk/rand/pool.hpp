#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>

#include "qmcrisk/rand/bits.hpp"

namespace qmcrisk::rand {

/// Sequential producer of packed (MSB-first) random bytes.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  /// Fills as much of `out` as possible; a short count means the source is exhausted.
  virtual std::size_t read(std::span<std::uint8_t> out) = 0;
  virtual std::string id() const = 0;
};

struct PoolMetadata {
  std::string source_id;
  std::string created_at;  // ISO-8601 UTC
  bool extractor_applied = false;
  std::optional<std::string> validation_report_id;

  bool operator==(const PoolMetadata&) const = default;
};

/// Half-open byte range of a pool payload handed out by EntropyPool::reserve.
struct ByteRange {
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};

/// Pre-fetched entropy stored on disk and consumed exactly once.
///
/// File layout (all integers big-endian):
///   [0, 8)    magic "QPOOL\0\0\0"
///   [8, 10)   format version (u16)
///   [10, 16)  reserved, zero
///   [16, 20)  metadata length L (u32)
///   [20, 20+L) metadata, UTF-8 "key=value" lines
///   [20+L, )  payload bytes
///
/// The consumption cursor lives in a sidecar file "<path>.cursor" so that a
/// reopened pool never hands out bytes twice. Allocation is serialized through
/// one handle; concurrent processes sharing a pool file are not supported.
class EntropyPool {
 public:
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::size_t kHeaderBytes = 16;

  /// Writes a pool filled from `source`. Throws ErrorCode::partial_fill when the
  /// source yields fewer than `bytes` (no file is left behind) and
  /// ErrorCode::storage on I/O failure.
  static EntropyPool create(const std::filesystem::path& path, ByteSource& source,
                            std::uint64_t bytes, PoolMetadata metadata);

  static EntropyPool create(const std::filesystem::path& path,
                            std::span<const std::uint8_t> payload, PoolMetadata metadata);

  static EntropyPool open(const std::filesystem::path& path);

  EntropyPool(EntropyPool&&) noexcept;
  EntropyPool& operator=(EntropyPool&&) noexcept;
  ~EntropyPool();

  const std::filesystem::path& path() const noexcept { return path_; }
  const PoolMetadata& metadata() const noexcept { return metadata_; }
  std::uint64_t total_bytes() const noexcept { return total_bytes_; }
  std::uint64_t cursor() const;
  std::uint64_t remaining() const;

  /// Consumes the next `bytes` bytes and returns them as bits.
  /// Throws ErrorCode::pool_exhausted naming the remaining count.
  BitBuffer read(std::uint64_t bytes);

  /// Consumes `bytes` without reading them; the caller reads the range later
  /// with read_range, possibly from several threads.
  ByteRange reserve(std::uint64_t bytes);

  /// Reads payload bytes at an absolute payload offset. Does not move the
  /// cursor; only meant for ranges previously obtained from reserve().
  void read_range(std::uint64_t offset, std::span<std::uint8_t> out) const;

 private:
  EntropyPool() = default;
  ByteRange advance(std::uint64_t bytes);
  void persist_cursor() const;

  std::filesystem::path path_;
  PoolMetadata metadata_;
  std::uint64_t payload_offset_ = 0;
  std::uint64_t total_bytes_ = 0;
  std::uint64_t cursor_ = 0;
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

/// Serializes metadata as the pool header's key/value document.
std::string encode_pool_metadata(const PoolMetadata& metadata, std::uint64_t payload_bytes);

std::string utc_timestamp_now();

}  // namespace qmcrisk::rand
