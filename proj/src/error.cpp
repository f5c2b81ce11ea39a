#include "qmcrisk/error.hpp"

namespace qmcrisk {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::insufficient_entropy: return "insufficient-entropy";
    case ErrorCode::domain: return "domain";
    case ErrorCode::pool_exhausted: return "pool-exhausted";
    case ErrorCode::partial_fill: return "partial-fill";
    case ErrorCode::storage: return "storage";
    case ErrorCode::network: return "network";
    case ErrorCode::provider: return "provider";
    case ErrorCode::malformed_response: return "malformed-response";
    case ErrorCode::format: return "format";
    case ErrorCode::empty_input: return "empty-input";
    case ErrorCode::insufficient_samples: return "insufficient-samples";
    case ErrorCode::degenerate_series: return "degenerate-series";
    case ErrorCode::data: return "data";
    case ErrorCode::ordering: return "ordering";
    case ErrorCode::insufficient_data: return "insufficient-data";
    case ErrorCode::not_psd: return "not-positive-semidefinite";
    case ErrorCode::insufficient_paths: return "insufficient-paths";
    case ErrorCode::entropy_exhausted: return "entropy-exhausted";
    case ErrorCode::partial_study: return "partial-study";
    case ErrorCode::validation: return "validation";
    case ErrorCode::not_found: return "not-found";
    case ErrorCode::conflict: return "conflict";
  }
  return "unknown";
}

Error Error::annotated(std::string_view context) const {
  return Error(code_, std::string(context) + ": " + what(), detail_);
}

}  // namespace qmcrisk
