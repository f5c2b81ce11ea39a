#include "qmcrisk/qsource/remote.hpp"

#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "qmcrisk/error.hpp"

namespace qmcrisk::qsource {

RemoteConfig RemoteConfig::from_descriptor(const RandomSourceDescriptor& d, std::string api_key) {
  d.validate();
  RemoteConfig c;
  c.endpoint = d.param_or("endpoint", "");
  c.max_words = static_cast<std::uint32_t>(d.uint_param("max_words", 1024));
  c.retries = static_cast<std::uint32_t>(d.uint_param("retries", 3));
  c.backoff = std::chrono::milliseconds(d.uint_param("backoff_ms", 500));
  c.timeout = std::chrono::milliseconds(d.uint_param("timeout_ms", 10000));
  c.api_key_header = d.param_or("api_key_header", "");
  c.api_key = std::move(api_key);
  return c;
}

RemoteEntropyClient::RemoteEntropyClient(RemoteConfig config) : config_(std::move(config)) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint, m, url_re)) {
    throw Error(ErrorCode::validation, "remote endpoint must be an http(s) URL: " + config_.endpoint);
  }
  scheme_host_port_ = m[1];
  path_ = m[2].matched ? std::string(m[2]) : "/";
  if (config_.max_words == 0) throw Error(ErrorCode::validation, "max_words must be positive");
}

std::uint64_t RemoteEntropyClient::requests_made() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

std::vector<std::uint16_t> RemoteEntropyClient::fetch_batch(std::uint32_t words) {
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!config_.api_key_header.empty() && !config_.api_key.empty()) {
    headers.emplace(config_.api_key_header, config_.api_key);
  }
  const httplib::Params query = {{"length", std::to_string(words)}, {"type", "uint16"}};
  const std::string target = httplib::append_query_params(path_, query);

  std::string last_failure;
  for (std::uint32_t attempt = 0; attempt <= config_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1u << (attempt - 1)));
    ++requests_;
    auto res = client.Get(target, headers);
    if (!res) {
      last_failure = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::provider, "entropy service answered HTTP " + std::to_string(res->status),
                  {{"status", std::to_string(res->status)}});
    }

    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::malformed_response, std::string("entropy response is not JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("success") || !doc["success"].is_boolean()) {
      throw Error(ErrorCode::malformed_response, "entropy response lacks a boolean 'success'");
    }
    if (!doc["success"].get<bool>()) {
      std::string why = doc.contains("message") && doc["message"].is_string()
                            ? doc["message"].get<std::string>()
                            : "success=false";
      throw Error(ErrorCode::provider, "entropy service refused request: " + why);
    }
    if (!doc.contains("data") || !doc["data"].is_array()) {
      throw Error(ErrorCode::malformed_response, "entropy response lacks a 'data' array");
    }
    std::vector<std::uint16_t> out;
    out.reserve(words);
    for (const auto& v : doc["data"]) {
      if (!v.is_number_integer()) {
        throw Error(ErrorCode::malformed_response, "entropy word is not an integer: " + v.dump());
      }
      const auto w = v.get<std::int64_t>();
      if (w < 0 || w > 65535) {
        throw Error(ErrorCode::malformed_response, "entropy word outside [0, 65535]: " + std::to_string(w),
                    {{"word", std::to_string(w)}});
      }
      out.push_back(static_cast<std::uint16_t>(w));
    }
    if (out.size() != words) {
      throw Error(ErrorCode::malformed_response,
                  "requested " + std::to_string(words) + " words, received " + std::to_string(out.size()));
    }
    return out;
  }
  throw Error(ErrorCode::network,
              "entropy service unreachable after " + std::to_string(config_.retries) +
                  " retries: " + last_failure,
              {{"retries", std::to_string(config_.retries)}, {"cause", last_failure}});
}

std::vector<std::uint16_t> RemoteEntropyClient::fetch_words(std::uint64_t count) {
  if (count == 0) throw Error(ErrorCode::validation, "word count must be at least 1");
  std::lock_guard lock(mutex_);
  std::vector<std::uint16_t> words;
  words.reserve(count);
  while (words.size() < count) {
    const auto batch = static_cast<std::uint32_t>(
        std::min<std::uint64_t>(config_.max_words, count - words.size()));
    auto got = fetch_batch(batch);
    words.insert(words.end(), got.begin(), got.end());
  }
  return words;
}

rand::BitBuffer RemoteEntropyClient::fetch_bits(std::uint64_t count) {
  const auto words = fetch_words(count);
  rand::BitBuffer bits;
  bits.origin = config_.endpoint;
  bits.bits.resize(words.size() * 16);
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (int b = 0; b < 16; ++b) bits.bits[i * 16 + b] = (words[i] >> (15 - b)) & 1u;
  }
  return bits;
}

rand::BitBuffer fetch_remote(const RandomSourceDescriptor& descriptor, std::uint64_t count,
                             const std::string& api_key) {
  if (descriptor.kind != SourceKind::remote_http) {
    throw Error(ErrorCode::validation, "source '" + descriptor.id + "' is not remote-http");
  }
  RemoteEntropyClient client(RemoteConfig::from_descriptor(descriptor, api_key));
  auto bits = client.fetch_bits(count);
  bits.origin = descriptor.id;
  return bits;
}

std::size_t RemoteByteSource::read(std::span<std::uint8_t> out) {
  std::size_t filled = std::min(out.size(), spill_.size());
  std::copy_n(spill_.begin(), filled, out.begin());
  spill_.erase(spill_.begin(), spill_.begin() + static_cast<std::ptrdiff_t>(filled));
  if (filled == out.size()) return filled;

  const std::uint64_t need = out.size() - filled;
  const auto words = client_.fetch_words((need + 1) / 2);
  std::vector<std::uint8_t> bytes;
  bytes.reserve(words.size() * 2);
  for (auto w : words) {
    bytes.push_back(static_cast<std::uint8_t>(w >> 8));
    bytes.push_back(static_cast<std::uint8_t>(w & 0xff));
  }
  std::copy_n(bytes.begin(), need, out.begin() + static_cast<std::ptrdiff_t>(filled));
  spill_.assign(bytes.begin() + static_cast<std::ptrdiff_t>(need), bytes.end());
  return out.size();
}

}  // namespace qmcrisk::qsource
