#include "qmcrisk/rand/pool.hpp"

#include <array>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>
#include <vector>

#include "qmcrisk/error.hpp"

namespace qmcrisk::rand {
namespace {

constexpr std::array<char, 8> kMagic = {'Q', 'P', 'O', 'O', 'L', '\0', '\0', '\0'};
constexpr std::size_t kChunk = 1 << 20;

Error storage_error(const std::filesystem::path& path, const std::string& what) {
  return Error(ErrorCode::storage, what + ": " + path.string(), {{"path", path.string()}});
}

void put_be(std::string& out, std::uint64_t value, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

std::uint64_t get_be(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | p[i];
  return v;
}

std::string header_bytes(const PoolMetadata& metadata, std::uint64_t payload_bytes) {
  std::string out(kMagic.begin(), kMagic.end());
  put_be(out, EntropyPool::kVersion, 2);
  out.append(6, '\0');
  const std::string doc = encode_pool_metadata(metadata, payload_bytes);
  put_be(out, doc.size(), 4);
  out += doc;
  return out;
}

std::filesystem::path cursor_path(const std::filesystem::path& pool) {
  auto p = pool;
  p += ".cursor";
  return p;
}

void write_cursor_file(const std::filesystem::path& pool, std::uint64_t cursor) {
  const auto target = cursor_path(pool);
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << cursor << '\n';
    if (!out) throw storage_error(tmp, "cannot write pool cursor");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw storage_error(target, "cannot update pool cursor");
}

}  // namespace

std::string encode_pool_metadata(const PoolMetadata& metadata, std::uint64_t payload_bytes) {
  std::ostringstream doc;
  doc << "source=" << metadata.source_id << '\n'
      << "created-at=" << metadata.created_at << '\n'
      << "extractor=" << (metadata.extractor_applied ? "true" : "false") << '\n';
  if (metadata.validation_report_id) doc << "validation-report=" << *metadata.validation_report_id << '\n';
  doc << "payload-bytes=" << payload_bytes << '\n';
  return doc.str();
}

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

EntropyPool EntropyPool::create(const std::filesystem::path& path, ByteSource& source,
                                std::uint64_t bytes, PoolMetadata metadata) {
  if (bytes == 0) throw Error(ErrorCode::domain, "pool size must be positive");
  if (metadata.created_at.empty()) metadata.created_at = utc_timestamp_now();
  if (metadata.source_id.empty()) metadata.source_id = source.id();

  const std::string header = header_bytes(metadata, bytes);
  std::uint64_t obtained = 0;
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw storage_error(path, "cannot create pool file");
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::vector<std::uint8_t> chunk(kChunk);
    while (obtained < bytes) {
      const std::size_t want = static_cast<std::size_t>(std::min<std::uint64_t>(kChunk, bytes - obtained));
      const std::size_t got = source.read(std::span(chunk.data(), want));
      out.write(reinterpret_cast<const char*>(chunk.data()), static_cast<std::streamsize>(got));
      obtained += got;
      if (got < want) break;
    }
    if (!out) {
      out.close();
      std::filesystem::remove(path);
      throw storage_error(path, "write failed");
    }
  }
  if (obtained < bytes) {
    std::filesystem::remove(path);
    throw Error(ErrorCode::partial_fill,
                "source " + source.id() + " yielded " + std::to_string(obtained) + " of " +
                    std::to_string(bytes) + " bytes",
                {{"obtained", std::to_string(obtained)}, {"requested", std::to_string(bytes)}});
  }
  write_cursor_file(path, 0);
  return open(path);
}

namespace {

class SpanSource final : public ByteSource {
 public:
  SpanSource(std::span<const std::uint8_t> data, std::string id) : data_(data), id_(std::move(id)) {}
  std::size_t read(std::span<std::uint8_t> out) override {
    const std::size_t n = std::min(out.size(), data_.size() - pos_);
    std::memcpy(out.data(), data_.data() + pos_, n);
    pos_ += n;
    return n;
  }
  std::string id() const override { return id_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string id_;
};

}  // namespace

EntropyPool EntropyPool::create(const std::filesystem::path& path,
                                std::span<const std::uint8_t> payload, PoolMetadata metadata) {
  SpanSource source(payload, metadata.source_id.empty() ? "memory" : metadata.source_id);
  return create(path, source, payload.size(), std::move(metadata));
}

EntropyPool EntropyPool::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw storage_error(path, "cannot open pool file");
  unsigned char head[kHeaderBytes + 4];
  in.read(reinterpret_cast<char*>(head), sizeof head);
  if (in.gcount() != static_cast<std::streamsize>(sizeof head) ||
      std::memcmp(head, kMagic.data(), kMagic.size()) != 0) {
    throw Error(ErrorCode::format, "not an entropy pool file: " + path.string());
  }
  const auto version = get_be(head + 8, 2);
  if (version != kVersion) {
    throw Error(ErrorCode::format, "unsupported pool version " + std::to_string(version));
  }
  const auto meta_len = get_be(head + kHeaderBytes, 4);
  std::string doc(meta_len, '\0');
  in.read(doc.data(), static_cast<std::streamsize>(meta_len));
  if (in.gcount() != static_cast<std::streamsize>(meta_len)) {
    throw Error(ErrorCode::format, "truncated pool metadata: " + path.string());
  }

  EntropyPool pool;
  pool.path_ = path;
  pool.payload_offset_ = kHeaderBytes + 4 + meta_len;
  const auto file_size = std::filesystem::file_size(path);
  pool.total_bytes_ = file_size - pool.payload_offset_;

  std::istringstream lines(doc);
  std::string line;
  std::optional<std::uint64_t> declared;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "source") pool.metadata_.source_id = value;
    else if (key == "created-at") pool.metadata_.created_at = value;
    else if (key == "extractor") pool.metadata_.extractor_applied = (value == "true");
    else if (key == "validation-report") pool.metadata_.validation_report_id = value;
    else if (key == "payload-bytes") declared = std::stoull(value);
  }
  if (declared && *declared != pool.total_bytes_) {
    throw Error(ErrorCode::format, "pool payload length mismatch: header says " +
                                       std::to_string(*declared) + ", file holds " +
                                       std::to_string(pool.total_bytes_));
  }

  std::ifstream cur(cursor_path(path));
  if (cur) {
    cur >> pool.cursor_;
    if (!cur || pool.cursor_ > pool.total_bytes_) {
      throw Error(ErrorCode::format, "corrupt pool cursor: " + cursor_path(path).string());
    }
  }
  return pool;
}

EntropyPool::EntropyPool(EntropyPool&&) noexcept = default;
EntropyPool& EntropyPool::operator=(EntropyPool&&) noexcept = default;
EntropyPool::~EntropyPool() = default;

std::uint64_t EntropyPool::cursor() const {
  std::lock_guard lock(*mutex_);
  return cursor_;
}

std::uint64_t EntropyPool::remaining() const {
  std::lock_guard lock(*mutex_);
  return total_bytes_ - cursor_;
}

ByteRange EntropyPool::advance(std::uint64_t bytes) {
  std::lock_guard lock(*mutex_);
  const std::uint64_t left = total_bytes_ - cursor_;
  if (bytes > left) {
    throw Error(ErrorCode::pool_exhausted,
                "pool " + path_.string() + " has " + std::to_string(left) + " bytes remaining, " +
                    std::to_string(bytes) + " requested",
                {{"remaining", std::to_string(left)}, {"requested", std::to_string(bytes)}});
  }
  ByteRange range{cursor_, bytes};
  cursor_ += bytes;
  if (bytes > 0) persist_cursor();
  return range;
}

ByteRange EntropyPool::reserve(std::uint64_t bytes) { return advance(bytes); }

BitBuffer EntropyPool::read(std::uint64_t bytes) {
  const ByteRange range = advance(bytes);
  std::vector<std::uint8_t> raw(range.length);
  read_range(range.offset, raw);
  return unpack_bytes(raw, metadata_.source_id.empty() ? path_.string() : metadata_.source_id);
}

void EntropyPool::read_range(std::uint64_t offset, std::span<std::uint8_t> out) const {
  if (out.empty()) return;
  if (offset + out.size() > total_bytes_) {
    throw Error(ErrorCode::pool_exhausted, "read past end of pool " + path_.string());
  }
  std::ifstream in(path_, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(payload_offset_ + offset));
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (in.gcount() != static_cast<std::streamsize>(out.size())) {
    throw storage_error(path_, "short read from pool");
  }
}

void EntropyPool::persist_cursor() const { write_cursor_file(path_, cursor_); }

}  // namespace qmcrisk::rand
