#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qmcrisk::rand {

/// Bits per uniform variate: the full double mantissa.
inline constexpr int kUniformBits = 53;
inline constexpr double kUniformScale = 0x1p-53;

/// Unpacked bit sequence, one 0/1 value per element.
struct BitBuffer {
  std::vector<std::uint8_t> bits;
  std::string origin;

  std::size_t size() const noexcept { return bits.size(); }
  bool empty() const noexcept { return bits.empty(); }

  /// Throws ErrorCode::domain if origin is empty or an element is not 0/1.
  void validate() const;
};

struct UniformBatch {
  std::vector<double> values;
  std::string source;
  std::uint64_t bits_consumed = 0;
  std::uint64_t remainder_bits = 0;
};

struct NormalBatch {
  std::vector<double> values;
  std::string source;
};

/// Decodes consecutive 53-bit groups, first bit most significant, as m / 2^53.
/// Throws ErrorCode::insufficient_entropy when fewer than 53 bits are given.
UniformBatch bits_to_uniform(const BitBuffer& bits);

/// Von Neumann pairing: 01 -> 0, 10 -> 1, 00/11 dropped, trailing odd bit dropped.
BitBuffer von_neumann_extract(const BitBuffer& bits);

/// MSB-first packing; a partial final byte is zero-padded.
std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits);

/// Expands bytes to bits, most significant bit first.
BitBuffer unpack_bytes(std::span<const std::uint8_t> bytes, std::string origin);

/// Decodes `out.size()` uniforms from packed MSB-first bytes, the first
/// variate starting at `bit_offset`. Caller guarantees the bit range exists.
/// Produces the same values as bits_to_uniform on the unpacked stream.
void decode_uniforms(std::span<const std::uint8_t> packed, std::uint64_t bit_offset,
                     std::span<double> out);

/// Bytes needed to hold `count` consecutive 53-bit variates.
constexpr std::uint64_t bytes_for_uniforms(std::uint64_t count) {
  return (count * kUniformBits + 7) / 8;
}

}  // namespace qmcrisk::rand
