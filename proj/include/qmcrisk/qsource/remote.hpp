#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "qmcrisk/qsource/descriptor.hpp"
#include "qmcrisk/rand/bits.hpp"
#include "qmcrisk/rand/pool.hpp"

namespace qmcrisk::qsource {

struct RemoteConfig {
  std::string endpoint;  // scheme://host[:port]/path
  std::uint32_t max_words = 1024;
  std::uint32_t retries = 3;
  std::chrono::milliseconds backoff{500};
  std::chrono::milliseconds timeout{10000};
  std::string api_key_header;  // empty: no key sent
  std::string api_key;

  static RemoteConfig from_descriptor(const RandomSourceDescriptor& descriptor,
                                      std::string api_key = {});
};

/// Client for a QRNG web service speaking
///   GET <path>?length=<n>&type=uint16  ->  {"success": bool, "data": [u16...]}
/// Calls on one client are serialized so words arrive in request order.
class RemoteEntropyClient {
 public:
  explicit RemoteEntropyClient(RemoteConfig config);

  /// Fetches `count` 16-bit words in batches of at most max_words.
  std::vector<std::uint16_t> fetch_words(std::uint64_t count);

  /// Words expanded MSB first; exactly 16 * count bits.
  rand::BitBuffer fetch_bits(std::uint64_t count);

  /// Total HTTP requests issued, retries included.
  std::uint64_t requests_made() const;

  const RemoteConfig& config() const noexcept { return config_; }

 private:
  std::vector<std::uint16_t> fetch_batch(std::uint32_t words);

  RemoteConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  mutable std::mutex mutex_;
  std::uint64_t requests_ = 0;
};

/// One-shot helper matching the descriptor-level contract.
rand::BitBuffer fetch_remote(const RandomSourceDescriptor& descriptor, std::uint64_t count,
                             const std::string& api_key = {});

/// Byte source that pulls words from a remote client on demand.
class RemoteByteSource final : public rand::ByteSource {
 public:
  RemoteByteSource(RemoteConfig config, std::string id)
      : client_(std::move(config)), id_(std::move(id)) {}

  std::size_t read(std::span<std::uint8_t> out) override;
  std::string id() const override { return id_; }
  const RemoteEntropyClient& client() const noexcept { return client_; }

 private:
  RemoteEntropyClient client_;
  std::string id_;
  std::vector<std::uint8_t> spill_;
};

}  // namespace qmcrisk::qsource
