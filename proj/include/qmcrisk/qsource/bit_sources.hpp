#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "qmcrisk/rand/bits.hpp"
#include "qmcrisk/rand/pool.hpp"

namespace qmcrisk::qsource {

/// Seeded Bernoulli(p) bit stream standing in for a QPU. Unbounded.
/// For p = 1/2 the engine's raw 64-bit words are emitted MSB first; otherwise
/// each bit is (u < p) for a fresh 53-bit uniform u.
class MockBitSource final : public rand::ByteSource {
 public:
  /// Throws ErrorCode::domain unless 0 <= p <= 1.
  MockBitSource(std::uint64_t seed, double p, std::string id = "mock");

  std::uint8_t next_bit();
  rand::BitBuffer take(std::size_t bits);

  std::size_t read(std::span<std::uint8_t> out) override;
  std::string id() const override { return id_; }

 private:
  std::mt19937_64 engine_;
  double p_;
  std::string id_;
  std::uint64_t word_ = 0;
  int word_bits_ = 0;
};

/// Packed bytes held in memory; exhausted after the last byte.
class MemoryByteSource final : public rand::ByteSource {
 public:
  MemoryByteSource(std::vector<std::uint8_t> bytes, std::string id)
      : bytes_(std::move(bytes)), id_(std::move(id)) {}

  std::size_t read(std::span<std::uint8_t> out) override;
  std::string id() const override { return id_; }
  std::uint64_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string id_;
};

/// Applies the Von Neumann extractor to another byte source on the fly.
class ExtractingByteSource final : public rand::ByteSource {
 public:
  explicit ExtractingByteSource(std::unique_ptr<rand::ByteSource> inner);

  std::size_t read(std::span<std::uint8_t> out) override;
  std::string id() const override { return inner_->id(); }

 private:
  bool next_output_bit(std::uint8_t& bit);

  std::unique_ptr<rand::ByteSource> inner_;
  std::vector<std::uint8_t> in_;
  std::size_t in_len_ = 0;
  std::size_t in_bit_ = 0;
  bool exhausted_ = false;
};

/// Reads a pool sequentially through its consume-once cursor.
class PoolByteSource final : public rand::ByteSource {
 public:
  explicit PoolByteSource(std::shared_ptr<rand::EntropyPool> pool) : pool_(std::move(pool)) {}
  std::size_t read(std::span<std::uint8_t> out) override;
  std::string id() const override;

 private:
  std::shared_ptr<rand::EntropyPool> pool_;
};

/// Drains `bytes` from a source; throws ErrorCode::entropy_exhausted if short.
std::vector<std::uint8_t> drain(rand::ByteSource& source, std::uint64_t bytes);

}  // namespace qmcrisk::qsource
