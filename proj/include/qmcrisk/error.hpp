#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qmcrisk {

enum class ErrorCode {
  // rand-core
  insufficient_entropy,
  domain,
  pool_exhausted,
  partial_fill,
  storage,
  // qsource
  network,
  provider,
  malformed_response,
  format,
  empty_input,
  // randtest
  insufficient_samples,
  degenerate_series,
  // market
  data,
  ordering,
  insufficient_data,
  not_psd,
  // riskcore
  insufficient_paths,
  entropy_exhausted,
  partial_study,
  // service
  validation,
  not_found,
  conflict,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. `detail` carries machine-readable context such as
/// required/available counts; the service layer serializes it verbatim.
class Error : public std::runtime_error {
 public:
  using Detail = std::map<std::string, std::string>;

  Error(ErrorCode code, const std::string& message, Detail detail = {})
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const Detail& detail() const noexcept { return detail_; }

  /// Copy with the message prefixed by `context` (e.g. a test or job name).
  Error annotated(std::string_view context) const;

 private:
  ErrorCode code_;
  Detail detail_;
};

}  // namespace qmcrisk
