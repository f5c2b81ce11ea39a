#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace qmcrisk::qsource {

enum class SourceKind { pseudo, remote_http, measurement_file, pool, mock };

std::string_view to_string(SourceKind kind);
/// Accepts the canonical names ("pseudo", "remote-http", "measurement-file", "pool", "mock").
SourceKind parse_source_kind(std::string_view name);

/// Identity and configuration of a uniform-randomness provider.
///
/// Recognised params per kind:
///   pseudo            seed, stream
///   remote-http       endpoint, max_words, retries, backoff_ms, timeout_ms, api_key_header
///   measurement-file  path, extract
///   pool              path
///   mock              seed, p, extract
struct RandomSourceDescriptor {
  std::string id;
  SourceKind kind = SourceKind::pseudo;
  std::map<std::string, std::string> params;

  /// Throws ErrorCode::validation on a missing id, unknown key, or bad value.
  void validate() const;

  std::optional<std::string> param(const std::string& key) const;
  std::string param_or(const std::string& key, std::string fallback) const;
  std::uint64_t uint_param(const std::string& key, std::uint64_t fallback) const;
  double real_param(const std::string& key, double fallback) const;
  bool bool_param(const std::string& key, bool fallback) const;

  bool operator==(const RandomSourceDescriptor&) const = default;
};

void to_json(nlohmann::json& j, const RandomSourceDescriptor& d);
void from_json(const nlohmann::json& j, RandomSourceDescriptor& d);

}  // namespace qmcrisk::qsource
