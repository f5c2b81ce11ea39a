#include "qmcrisk/qsource/bit_sources.hpp"

#include <cstring>

#include "qmcrisk/error.hpp"

namespace qmcrisk::qsource {

MockBitSource::MockBitSource(std::uint64_t seed, double p, std::string id)
    : engine_(seed), p_(p), id_(std::move(id)) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::domain, "mock bias must lie in [0, 1], got " + std::to_string(p),
                {{"p", std::to_string(p)}});
  }
}

std::uint8_t MockBitSource::next_bit() {
  if (p_ == 0.5) {
    if (word_bits_ == 0) {
      word_ = engine_();
      word_bits_ = 64;
    }
    --word_bits_;
    return static_cast<std::uint8_t>((word_ >> word_bits_) & 1u);
  }
  const double u = static_cast<double>(engine_() >> 11) * rand::kUniformScale;
  return u < p_ ? 1 : 0;
}

rand::BitBuffer MockBitSource::take(std::size_t bits) {
  rand::BitBuffer out;
  out.origin = id_;
  out.bits.resize(bits);
  for (auto& b : out.bits) b = next_bit();
  return out;
}

std::size_t MockBitSource::read(std::span<std::uint8_t> out) {
  if (p_ == 0.5 && word_bits_ == 0) {
    // Whole words straight through.
    std::size_t i = 0;
    for (; i + 8 <= out.size(); i += 8) {
      const std::uint64_t w = engine_();
      for (int k = 0; k < 8; ++k) out[i + k] = static_cast<std::uint8_t>(w >> (56 - 8 * k));
    }
    for (; i < out.size(); ++i) {
      std::uint8_t byte = 0;
      for (int k = 0; k < 8; ++k) byte = static_cast<std::uint8_t>((byte << 1) | next_bit());
      out[i] = byte;
    }
    return out.size();
  }
  for (auto& byte : out) {
    std::uint8_t v = 0;
    for (int k = 0; k < 8; ++k) v = static_cast<std::uint8_t>((v << 1) | next_bit());
    byte = v;
  }
  return out.size();
}

std::size_t MemoryByteSource::read(std::span<std::uint8_t> out) {
  const std::size_t n = std::min(out.size(), bytes_.size() - pos_);
  if (n > 0) std::memcpy(out.data(), bytes_.data() + pos_, n);
  pos_ += n;
  return n;
}

ExtractingByteSource::ExtractingByteSource(std::unique_ptr<rand::ByteSource> inner)
    : inner_(std::move(inner)), in_(1 << 16) {}

bool ExtractingByteSource::next_output_bit(std::uint8_t& bit) {
  for (;;) {
    if (in_bit_ + 2 > in_len_ * 8) {
      if (exhausted_) return false;
      in_len_ = inner_->read(in_);
      in_bit_ = 0;
      if (in_len_ < in_.size()) exhausted_ = true;
      if (in_len_ == 0) return false;
    }
    // Pairs never straddle a byte: each byte holds four whole pairs.
    const std::uint8_t byte = in_[in_bit_ / 8];
    const unsigned pos = in_bit_ % 8;
    const std::uint8_t first = (byte >> (7 - pos)) & 1u;
    const std::uint8_t second = (byte >> (6 - pos)) & 1u;
    in_bit_ += 2;
    if (first != second) {
      bit = first;
      return true;
    }
  }
}

std::size_t ExtractingByteSource::read(std::span<std::uint8_t> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint8_t v = 0;
    for (int k = 0; k < 8; ++k) {
      std::uint8_t bit;
      if (!next_output_bit(bit)) return i;  // partial byte discarded
      v = static_cast<std::uint8_t>((v << 1) | bit);
    }
    out[i] = v;
  }
  return out.size();
}

std::size_t PoolByteSource::read(std::span<std::uint8_t> out) {
  const std::uint64_t n = std::min<std::uint64_t>(out.size(), pool_->remaining());
  const auto range = pool_->reserve(n);
  pool_->read_range(range.offset, out.first(static_cast<std::size_t>(n)));
  return static_cast<std::size_t>(n);
}

std::string PoolByteSource::id() const {
  const auto& id = pool_->metadata().source_id;
  return id.empty() ? pool_->path().string() : id;
}

std::vector<std::uint8_t> drain(rand::ByteSource& source, std::uint64_t bytes) {
  std::vector<std::uint8_t> out(bytes);
  const std::size_t got = source.read(out);
  if (got < bytes) {
    throw Error(ErrorCode::entropy_exhausted,
                "source " + source.id() + " supplied " + std::to_string(got) + " of " +
                    std::to_string(bytes) + " bytes",
                {{"obtained", std::to_string(got)}, {"requested", std::to_string(bytes)}});
  }
  return out;
}

}  // namespace qmcrisk::qsource
