#include "qmcrisk/qsource/descriptor.hpp"

#include <charconv>
#include <set>

#include "qmcrisk/error.hpp"

namespace qmcrisk::qsource {
namespace {

Error invalid(const std::string& id, const std::string& what) {
  return Error(ErrorCode::validation, "source '" + id + "': " + what, {{"source", id}});
}

const std::set<std::string>& allowed_keys(SourceKind kind) {
  static const std::map<SourceKind, std::set<std::string>> keys = {
      {SourceKind::pseudo, {"seed", "stream"}},
      {SourceKind::remote_http,
       {"endpoint", "max_words", "retries", "backoff_ms", "timeout_ms", "api_key_header"}},
      {SourceKind::measurement_file, {"path", "extract"}},
      {SourceKind::pool, {"path"}},
      {SourceKind::mock, {"seed", "p", "extract"}},
  };
  return keys.at(kind);
}

}  // namespace

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::pseudo: return "pseudo";
    case SourceKind::remote_http: return "remote-http";
    case SourceKind::measurement_file: return "measurement-file";
    case SourceKind::pool: return "pool";
    case SourceKind::mock: return "mock";
  }
  return "unknown";
}

SourceKind parse_source_kind(std::string_view name) {
  for (auto kind : {SourceKind::pseudo, SourceKind::remote_http, SourceKind::measurement_file,
                    SourceKind::pool, SourceKind::mock}) {
    if (to_string(kind) == name) return kind;
  }
  throw Error(ErrorCode::validation, "unknown source kind '" + std::string(name) + "'");
}

std::optional<std::string> RandomSourceDescriptor::param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) return std::nullopt;
  return it->second;
}

std::string RandomSourceDescriptor::param_or(const std::string& key, std::string fallback) const {
  auto v = param(key);
  return v ? *v : std::move(fallback);
}

std::uint64_t RandomSourceDescriptor::uint_param(const std::string& key, std::uint64_t fallback) const {
  auto v = param(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size()) {
    throw invalid(id, "parameter " + key + " must be a non-negative integer, got '" + *v + "'");
  }
  return out;
}

double RandomSourceDescriptor::real_param(const std::string& key, double fallback) const {
  auto v = param(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double out = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(key);
    return out;
  } catch (const std::exception&) {
    throw invalid(id, "parameter " + key + " must be a real number, got '" + *v + "'");
  }
}

bool RandomSourceDescriptor::bool_param(const std::string& key, bool fallback) const {
  auto v = param(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw invalid(id, "parameter " + key + " must be true or false, got '" + *v + "'");
}

void RandomSourceDescriptor::validate() const {
  if (id.empty()) throw Error(ErrorCode::validation, "source id must be non-empty");
  const auto& keys = allowed_keys(kind);
  for (const auto& [key, value] : params) {
    if (!keys.contains(key)) {
      throw invalid(id, "unknown parameter '" + key + "' for kind " + std::string(to_string(kind)));
    }
  }
  switch (kind) {
    case SourceKind::pseudo:
      uint_param("seed", 0);
      uint_param("stream", 0);
      break;
    case SourceKind::remote_http:
      if (param_or("endpoint", "").empty()) throw invalid(id, "remote-http requires an endpoint");
      if (uint_param("max_words", 1024) == 0) throw invalid(id, "max_words must be positive");
      uint_param("retries", 3);
      uint_param("backoff_ms", 500);
      uint_param("timeout_ms", 10000);
      break;
    case SourceKind::measurement_file:
      if (param_or("path", "").empty()) throw invalid(id, "measurement-file requires a path");
      bool_param("extract", false);
      break;
    case SourceKind::pool:
      if (param_or("path", "").empty()) throw invalid(id, "pool requires a path");
      break;
    case SourceKind::mock: {
      uint_param("seed", 0);
      const double p = real_param("p", 0.5);
      if (!(p >= 0.0 && p <= 1.0)) throw invalid(id, "mock bias p must lie in [0, 1], got " + std::to_string(p));
      bool_param("extract", false);
      break;
    }
  }
}

void to_json(nlohmann::json& j, const RandomSourceDescriptor& d) {
  j = nlohmann::json{{"id", d.id}, {"kind", std::string(to_string(d.kind))}, {"params", d.params}};
}

void from_json(const nlohmann::json& j, RandomSourceDescriptor& d) {
  if (!j.is_object() || !j.contains("id") || !j.contains("kind")) {
    throw Error(ErrorCode::validation, "source descriptor needs 'id' and 'kind'");
  }
  d.id = j.at("id").get<std::string>();
  d.kind = parse_source_kind(j.at("kind").get<std::string>());
  d.params.clear();
  if (j.contains("params")) {
    for (const auto& [key, value] : j.at("params").items()) {
      d.params[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
}

}  // namespace qmcrisk::qsource
