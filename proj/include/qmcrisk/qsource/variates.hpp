#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "qmcrisk/qsource/descriptor.hpp"
#include "qmcrisk/rand/pool.hpp"

namespace qmcrisk::qsource {

/// Random-access view over a block of uniforms that has already been consumed
/// from its source. Reads are const and safe from any number of threads, so
/// parallel workers can each decode their own disjoint index range.
class UniformStream {
 public:
  virtual ~UniformStream() = default;
  virtual std::uint64_t size() const noexcept = 0;
  /// Uniforms with indices [first, first + out.size()), each in [0, 1).
  virtual void uniforms(std::uint64_t first, std::span<double> out) const = 0;
  /// Standard normals by inverse transform of the same uniforms.
  void normals(std::uint64_t first, std::span<double> out) const;
};

/// A pluggable randomness provider for simulation and validation.
class RandomSource {
 public:
  explicit RandomSource(RandomSourceDescriptor descriptor) : descriptor_(std::move(descriptor)) {}
  virtual ~RandomSource() = default;

  const RandomSourceDescriptor& descriptor() const noexcept { return descriptor_; }
  const std::string& id() const noexcept { return descriptor_.id; }

  /// Consumes the entropy for `count` variates up front. Successive calls
  /// never share entropy. Throws ErrorCode::entropy_exhausted.
  virtual std::unique_ptr<UniformStream> reserve(std::uint64_t count) = 0;

  /// Variates still available; nullopt when unbounded.
  virtual std::optional<std::uint64_t> capacity() const { return std::nullopt; }

 private:
  RandomSourceDescriptor descriptor_;
};

/// Counter-based SplitMix64: variate j of a stream is a pure function of
/// (seed, stream, j), so any index range can be generated independently.
/// Each reserve() moves to the next stream.
class PseudoSource final : public RandomSource {
 public:
  explicit PseudoSource(RandomSourceDescriptor descriptor);
  PseudoSource(std::string id, std::uint64_t seed, std::uint64_t stream = 0);

  std::unique_ptr<UniformStream> reserve(std::uint64_t count) override;
  std::uint64_t next_stream() const noexcept { return stream_; }

  static std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) noexcept;
  static std::uint64_t word(std::uint64_t key, std::uint64_t index) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

/// Variates decoded from a pool's payload, 53 bits each, in reservation order.
class PoolSource final : public RandomSource {
 public:
  PoolSource(RandomSourceDescriptor descriptor, std::shared_ptr<rand::EntropyPool> pool);

  std::unique_ptr<UniformStream> reserve(std::uint64_t count) override;
  std::optional<std::uint64_t> capacity() const override;
  const std::shared_ptr<rand::EntropyPool>& pool() const noexcept { return pool_; }

 private:
  std::shared_ptr<rand::EntropyPool> pool_;
};

/// Adapts a sequential byte source; reserve() materializes the bytes in memory.
class ByteStreamSource final : public RandomSource {
 public:
  ByteStreamSource(RandomSourceDescriptor descriptor, std::unique_ptr<rand::ByteSource> bytes);
  std::unique_ptr<UniformStream> reserve(std::uint64_t count) override;

 private:
  std::unique_ptr<rand::ByteSource> bytes_;
};

/// Uniforms decoded from packed bytes held in memory.
class PackedUniformStream final : public UniformStream {
 public:
  PackedUniformStream(std::vector<std::uint8_t> bytes, std::uint64_t count)
      : bytes_(std::move(bytes)), count_(count) {}
  std::uint64_t size() const noexcept override { return count_; }
  void uniforms(std::uint64_t first, std::span<double> out) const override;

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t count_;
};

struct SourceContext {
  std::string api_key;                 // forwarded to remote-http sources
  std::filesystem::path base_dir = ".";  // relative file paths resolve here
};

std::unique_ptr<RandomSource> make_source(const RandomSourceDescriptor& descriptor,
                                          const SourceContext& context = {});

/// Sequential byte view of any source kind (pool reads consume the pool).
std::unique_ptr<rand::ByteSource> make_byte_source(const RandomSourceDescriptor& descriptor,
                                                   const SourceContext& context = {});

/// Fills a new pool from the described source.
rand::EntropyPool create_pool(const std::filesystem::path& path,
                              const RandomSourceDescriptor& descriptor, std::uint64_t bytes,
                              const SourceContext& context = {});

/// Convenience: reserve `count` uniforms and decode them all.
std::vector<double> draw_uniforms(RandomSource& source, std::uint64_t count);

}  // namespace qmcrisk::qsource
