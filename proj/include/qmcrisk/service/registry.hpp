#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "qmcrisk/qsource/descriptor.hpp"
#include "qmcrisk/qsource/variates.hpp"

namespace qmcrisk::service {

/// Registered randomness sources, persisted as JSON.
///
/// Pseudo sources are stateless: each open() starts from the descriptor's
/// (seed, stream), so equal job configs draw equal variates. Every other kind
/// is opened once and shared, which keeps pool cursors and finite streams
/// consume-once across jobs; its reservations are serialized.
class SourceRegistry {
 public:
  SourceRegistry(std::filesystem::path file, qsource::SourceContext context);

  /// ErrorCode::validation for a bad descriptor, ErrorCode::conflict for a duplicate id.
  std::string add(const qsource::RandomSourceDescriptor& descriptor);
  std::vector<qsource::RandomSourceDescriptor> list() const;
  /// ErrorCode::not_found for an unknown id.
  qsource::RandomSourceDescriptor get(const std::string& id) const;
  bool contains(const std::string& id) const;

  std::shared_ptr<qsource::RandomSource> open(const std::string& id);

  void link_report(const std::string& id, const std::string& report_id);
  std::optional<std::string> report_for(const std::string& id) const;

  const qsource::SourceContext& context() const noexcept { return context_; }

 private:
  void persist() const;

  std::filesystem::path file_;
  qsource::SourceContext context_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, qsource::RandomSourceDescriptor> sources_;
  std::map<std::string, std::string> reports_;
  std::map<std::string, std::shared_ptr<qsource::RandomSource>> live_;
};

}  // namespace qmcrisk::service
