#include "qmcrisk/rand/bits.hpp"

#include <algorithm>

#include "qmcrisk/error.hpp"

namespace qmcrisk::rand {

void BitBuffer::validate() const {
  if (origin.empty()) throw Error(ErrorCode::domain, "bit buffer origin must be non-empty");
  auto bad = std::find_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b > 1; });
  if (bad != bits.end()) {
    throw Error(ErrorCode::domain, "bit buffer element is not 0 or 1",
                {{"index", std::to_string(bad - bits.begin())}});
  }
}

UniformBatch bits_to_uniform(const BitBuffer& bits) {
  const std::uint64_t n = bits.size();
  if (n < kUniformBits) {
    throw Error(ErrorCode::insufficient_entropy,
                "need at least " + std::to_string(kUniformBits) + " bits, got " +
                    std::to_string(n),
                {{"required", std::to_string(kUniformBits)}, {"available", std::to_string(n)}});
  }
  UniformBatch batch;
  batch.source = bits.origin;
  const std::uint64_t groups = n / kUniformBits;
  batch.values.reserve(groups);
  for (std::uint64_t g = 0; g < groups; ++g) {
    std::uint64_t m = 0;
    for (int i = 0; i < kUniformBits; ++i) m = (m << 1) | (bits.bits[g * kUniformBits + i] & 1u);
    batch.values.push_back(static_cast<double>(m) * kUniformScale);
  }
  batch.bits_consumed = groups * kUniformBits;
  batch.remainder_bits = n - batch.bits_consumed;
  return batch;
}

BitBuffer von_neumann_extract(const BitBuffer& bits) {
  BitBuffer out;
  out.origin = bits.origin;
  out.bits.reserve(bits.size() / 4);
  for (std::size_t i = 0; i + 1 < bits.size(); i += 2) {
    const std::uint8_t a = bits.bits[i];
    if (a != bits.bits[i + 1]) out.bits.push_back(a);
  }
  return out;
}

std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits) {
  std::vector<std::uint8_t> bytes((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) bytes[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return bytes;
}

BitBuffer unpack_bytes(std::span<const std::uint8_t> bytes, std::string origin) {
  BitBuffer out;
  out.origin = std::move(origin);
  out.bits.resize(bytes.size() * 8);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    for (int b = 0; b < 8; ++b) out.bits[i * 8 + b] = (bytes[i] >> (7 - b)) & 1u;
  }
  return out;
}

void decode_uniforms(std::span<const std::uint8_t> packed, std::uint64_t bit_offset,
                     std::span<double> out) {
  const std::size_t n = packed.size();
  for (std::size_t v = 0; v < out.size(); ++v) {
    const std::uint64_t start = bit_offset + v * kUniformBits;
    const std::size_t byte = start / 8;
    const unsigned shift = start % 8;
    // 53 + 7 bits fit in one big-endian 64-bit window.
    std::uint64_t window = 0;
    if (byte + 8 <= n) {
      for (int i = 0; i < 8; ++i) window = (window << 8) | packed[byte + i];
    } else {
      for (std::size_t i = 0; i < 8; ++i) window = (window << 8) | (byte + i < n ? packed[byte + i] : 0);
    }
    const std::uint64_t m = (window << shift) >> (64 - kUniformBits);
    out[v] = static_cast<double>(m) * kUniformScale;
  }
}

}  // namespace qmcrisk::rand
