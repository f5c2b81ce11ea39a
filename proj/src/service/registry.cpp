#include "qmcrisk/service/registry.hpp"

#include <fstream>
#include <mutex>

#include <json.hpp>

#include "qmcrisk/error.hpp"

namespace qmcrisk::service {
namespace {

/// Serializes reservations on a shared stateful source.
class SerializedSource final : public qsource::RandomSource {
 public:
  explicit SerializedSource(std::unique_ptr<qsource::RandomSource> inner)
      : RandomSource(inner->descriptor()), inner_(std::move(inner)) {}

  std::unique_ptr<qsource::UniformStream> reserve(std::uint64_t count) override {
    std::lock_guard lock(mutex_);
    return inner_->reserve(count);
  }
  std::optional<std::uint64_t> capacity() const override {
    std::lock_guard lock(mutex_);
    return inner_->capacity();
  }

 private:
  std::unique_ptr<qsource::RandomSource> inner_;
  mutable std::mutex mutex_;
};

}  // namespace

SourceRegistry::SourceRegistry(std::filesystem::path file, qsource::SourceContext context)
    : file_(std::move(file)), context_(std::move(context)) {
  std::ifstream in(file_);
  if (!in) return;
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::storage, "corrupt source registry " + file_.string() + ": " + e.what());
  }
  for (const auto& s : doc.value("sources", nlohmann::json::array())) {
    auto d = s.get<qsource::RandomSourceDescriptor>();
    sources_[d.id] = d;
  }
  const auto reports = doc.value("reports", nlohmann::json::object());
  for (const auto& [id, report] : reports.items()) {
    reports_[id] = report.get<std::string>();
  }
}

void SourceRegistry::persist() const {
  nlohmann::json doc;
  doc["sources"] = nlohmann::json::array();
  for (const auto& [id, d] : sources_) doc["sources"].push_back(d);
  doc["reports"] = reports_;
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
  auto tmp = file_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << doc.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::storage, "cannot write source registry " + tmp.string());
  }
  std::filesystem::rename(tmp, file_);
}

std::string SourceRegistry::add(const qsource::RandomSourceDescriptor& descriptor) {
  descriptor.validate();
  std::unique_lock lock(mutex_);
  if (sources_.contains(descriptor.id)) {
    throw Error(ErrorCode::conflict, "source '" + descriptor.id + "' is already registered",
                {{"source", descriptor.id}});
  }
  sources_[descriptor.id] = descriptor;
  persist();
  return descriptor.id;
}

std::vector<qsource::RandomSourceDescriptor> SourceRegistry::list() const {
  std::shared_lock lock(mutex_);
  std::vector<qsource::RandomSourceDescriptor> out;
  for (const auto& [id, d] : sources_) out.push_back(d);
  return out;
}

qsource::RandomSourceDescriptor SourceRegistry::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sources_.find(id);
  if (it == sources_.end()) throw Error(ErrorCode::not_found, "unknown source '" + id + "'", {{"source", id}});
  return it->second;
}

bool SourceRegistry::contains(const std::string& id) const {
  std::shared_lock lock(mutex_);
  return sources_.contains(id);
}

std::shared_ptr<qsource::RandomSource> SourceRegistry::open(const std::string& id) {
  const auto descriptor = get(id);
  if (descriptor.kind == qsource::SourceKind::pseudo) return qsource::make_source(descriptor, context_);
  std::unique_lock lock(mutex_);
  auto it = live_.find(id);
  if (it != live_.end()) return it->second;
  auto shared = std::make_shared<SerializedSource>(qsource::make_source(descriptor, context_));
  live_[id] = shared;
  return shared;
}

void SourceRegistry::link_report(const std::string& id, const std::string& report_id) {
  std::unique_lock lock(mutex_);
  if (!sources_.contains(id)) throw Error(ErrorCode::not_found, "unknown source '" + id + "'");
  reports_[id] = report_id;
  persist();
}

std::optional<std::string> SourceRegistry::report_for(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = reports_.find(id);
  if (it == reports_.end()) return std::nullopt;
  return it->second;
}

}  // namespace qmcrisk::service
