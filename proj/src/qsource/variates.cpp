#include "qmcrisk/qsource/variates.hpp"

#include <vector>

#include "qmcrisk/error.hpp"
#include "qmcrisk/qsource/bit_sources.hpp"
#include "qmcrisk/qsource/records.hpp"
#include "qmcrisk/qsource/remote.hpp"
#include "qmcrisk/rand/bits.hpp"
#include "qmcrisk/rand/normal.hpp"

namespace qmcrisk::qsource {
namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void check_range(std::uint64_t first, std::size_t n, std::uint64_t count) {
  if (first > count || n > count - first) {
    throw Error(ErrorCode::entropy_exhausted, "variate index beyond reserved range",
                {{"requested", std::to_string(first + n)}, {"available", std::to_string(count)}, {"consumed", "0"}});
  }
}

class PseudoStream final : public UniformStream {
 public:
  PseudoStream(std::uint64_t key, std::uint64_t count) : key_(key), count_(count) {}
  std::uint64_t size() const noexcept override { return count_; }
  void uniforms(std::uint64_t first, std::span<double> out) const override {
    check_range(first, out.size(), count_);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<double>(PseudoSource::word(key_, first + i) >> 11) * rand::kUniformScale;
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t count_;
};

class PseudoByteSource final : public rand::ByteSource {
 public:
  PseudoByteSource(std::uint64_t key, std::string id) : key_(key), id_(std::move(id)) {}
  std::size_t read(std::span<std::uint8_t> out) override {
    for (auto& byte : out) {
      const std::uint64_t w = PseudoSource::word(key_, pos_ / 8);
      byte = static_cast<std::uint8_t>(w >> (56 - 8 * (pos_ % 8)));
      ++pos_;
    }
    return out.size();
  }
  std::string id() const override { return id_; }

 private:
  std::uint64_t key_;
  std::uint64_t pos_ = 0;
  std::string id_;
};

class PoolStream final : public UniformStream {
 public:
  PoolStream(std::shared_ptr<rand::EntropyPool> pool, rand::ByteRange range, std::uint64_t count)
      : pool_(std::move(pool)), range_(range), count_(count) {}
  std::uint64_t size() const noexcept override { return count_; }
  void uniforms(std::uint64_t first, std::span<double> out) const override {
    check_range(first, out.size(), count_);
    if (out.empty()) return;
    const std::uint64_t start_bit = first * rand::kUniformBits;
    const std::uint64_t end_bit = (first + out.size()) * rand::kUniformBits;
    const std::uint64_t lo = start_bit / 8;
    const std::uint64_t hi = (end_bit + 7) / 8;
    std::vector<std::uint8_t> buf(hi - lo);
    pool_->read_range(range_.offset + lo, buf);
    rand::decode_uniforms(buf, start_bit - lo * 8, out);
  }

 private:
  std::shared_ptr<rand::EntropyPool> pool_;
  rand::ByteRange range_;
  std::uint64_t count_;
};

std::filesystem::path resolve(const SourceContext& ctx, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : ctx.base_dir / path;
}

Error exhausted(const std::string& id, std::uint64_t requested, std::uint64_t available) {
  return Error(ErrorCode::entropy_exhausted,
               "source " + id + " cannot supply " + std::to_string(requested) +
                   " variates (available " + std::to_string(available) + ", consumed 0)",
               {{"requested", std::to_string(requested)},
                {"available", std::to_string(available)},
                {"consumed", "0"}});
}

}  // namespace

void UniformStream::normals(std::uint64_t first, std::span<double> out) const {
  uniforms(first, out);
  rand::uniforms_to_normals(out);
}

std::uint64_t PseudoSource::stream_key(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) + kGamma * (stream + 1));
}

std::uint64_t PseudoSource::word(std::uint64_t key, std::uint64_t index) noexcept {
  return mix64(key + kGamma * (index + 1));
}

PseudoSource::PseudoSource(RandomSourceDescriptor descriptor)
    : RandomSource(std::move(descriptor)),
      seed_(this->descriptor().uint_param("seed", 0)),
      stream_(this->descriptor().uint_param("stream", 0)) {}

PseudoSource::PseudoSource(std::string id, std::uint64_t seed, std::uint64_t stream)
    : RandomSource(RandomSourceDescriptor{std::move(id), SourceKind::pseudo,
                                          {{"seed", std::to_string(seed)},
                                           {"stream", std::to_string(stream)}}}),
      seed_(seed),
      stream_(stream) {}

std::unique_ptr<UniformStream> PseudoSource::reserve(std::uint64_t count) {
  return std::make_unique<PseudoStream>(stream_key(seed_, stream_++), count);
}

PoolSource::PoolSource(RandomSourceDescriptor descriptor, std::shared_ptr<rand::EntropyPool> pool)
    : RandomSource(std::move(descriptor)), pool_(std::move(pool)) {}

std::unique_ptr<UniformStream> PoolSource::reserve(std::uint64_t count) {
  const std::uint64_t bytes = rand::bytes_for_uniforms(count);
  try {
    const auto range = pool_->reserve(bytes);
    return std::make_unique<PoolStream>(pool_, range, count);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::pool_exhausted) throw;
    throw exhausted(id(), count, *capacity());
  }
}

std::optional<std::uint64_t> PoolSource::capacity() const {
  return pool_->remaining() * 8 / rand::kUniformBits;
}

ByteStreamSource::ByteStreamSource(RandomSourceDescriptor descriptor,
                                   std::unique_ptr<rand::ByteSource> bytes)
    : RandomSource(std::move(descriptor)), bytes_(std::move(bytes)) {}

std::unique_ptr<UniformStream> ByteStreamSource::reserve(std::uint64_t count) {
  const std::uint64_t need = rand::bytes_for_uniforms(count);
  std::vector<std::uint8_t> bytes(need);
  const std::size_t got = bytes_->read(bytes);
  if (got < need) throw exhausted(id(), count, got * 8 / rand::kUniformBits);
  return std::make_unique<PackedUniformStream>(std::move(bytes), count);
}

void PackedUniformStream::uniforms(std::uint64_t first, std::span<double> out) const {
  check_range(first, out.size(), count_);
  rand::decode_uniforms(bytes_, first * rand::kUniformBits, out);
}

std::unique_ptr<rand::ByteSource> make_byte_source(const RandomSourceDescriptor& d,
                                                   const SourceContext& ctx) {
  d.validate();
  switch (d.kind) {
    case SourceKind::pseudo:
      return std::make_unique<PseudoByteSource>(
          PseudoSource::stream_key(d.uint_param("seed", 0), d.uint_param("stream", 0)), d.id);
    case SourceKind::mock: {
      std::unique_ptr<rand::ByteSource> src =
          std::make_unique<MockBitSource>(d.uint_param("seed", 0), d.real_param("p", 0.5), d.id);
      if (d.bool_param("extract", false)) src = std::make_unique<ExtractingByteSource>(std::move(src));
      return src;
    }
    case SourceKind::measurement_file: {
      const auto records = ingest_measurement_records(resolve(ctx, d.param_or("path", "")));
      auto bits = records_to_bits(records, d.bool_param("extract", false));
      // Only whole bytes; zero padding would bias the stream.
      const std::size_t whole = bits.size() / 8 * 8;
      auto packed = rand::pack_bits(std::span(bits.bits).first(whole));
      return std::make_unique<MemoryByteSource>(std::move(packed), d.id);
    }
    case SourceKind::remote_http:
      return std::make_unique<RemoteByteSource>(RemoteConfig::from_descriptor(d, ctx.api_key), d.id);
    case SourceKind::pool:
      return std::make_unique<PoolByteSource>(
          std::make_shared<rand::EntropyPool>(rand::EntropyPool::open(resolve(ctx, d.param_or("path", "")))));
  }
  throw Error(ErrorCode::validation, "unsupported source kind");
}

std::unique_ptr<RandomSource> make_source(const RandomSourceDescriptor& d, const SourceContext& ctx) {
  d.validate();
  switch (d.kind) {
    case SourceKind::pseudo:
      return std::make_unique<PseudoSource>(d);
    case SourceKind::pool:
      return std::make_unique<PoolSource>(
          d, std::make_shared<rand::EntropyPool>(rand::EntropyPool::open(resolve(ctx, d.param_or("path", "")))));
    default:
      return std::make_unique<ByteStreamSource>(d, make_byte_source(d, ctx));
  }
}

rand::EntropyPool create_pool(const std::filesystem::path& path, const RandomSourceDescriptor& d,
                              std::uint64_t bytes, const SourceContext& ctx) {
  auto source = make_byte_source(d, ctx);
  rand::PoolMetadata meta;
  meta.source_id = d.id;
  meta.extractor_applied = (d.kind == SourceKind::mock || d.kind == SourceKind::measurement_file) &&
                           d.bool_param("extract", false);
  return rand::EntropyPool::create(path, *source, bytes, std::move(meta));
}

std::vector<double> draw_uniforms(RandomSource& source, std::uint64_t count) {
  auto stream = source.reserve(count);
  std::vector<double> out(count);
  stream->uniforms(0, out);
  return out;
}

}  // namespace qmcrisk::qsource
