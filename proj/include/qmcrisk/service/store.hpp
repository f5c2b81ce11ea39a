#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmcrisk/market/market.hpp"
#include "qmcrisk/risk/engine.hpp"

namespace qmcrisk::service {

enum class JobStatus { queued, running, done, failed };

std::string_view to_string(JobStatus status);
JobStatus parse_job_status(std::string_view name);

struct JobRecord {
  std::string id;
  nlohmann::json config;  // normalized job request
  JobStatus status = JobStatus::queued;
  std::optional<risk::RiskReport> result;
  std::optional<nlohmann::json> error;  // {code, message, detail}
  std::string created;
  std::string finished;  // empty until done or failed
};

nlohmann::json to_json(const JobRecord& job);
JobRecord job_record_from_json(const nlohmann::json& j);

/// Single-directory embedded store:
///   jobs.log            append-only JSON lines, one snapshot per status change
///   reports/<id>.json   finished RiskReport blobs
///   returns/<id>.bin    simulated portfolio returns (raw doubles)
///   prices/<id>.csv, portfolios/<id>.json, validations/<id>.json
/// The newest snapshot of an id wins on reload; a {"deleted": id} line removes it.
class Store {
 public:
  explicit Store(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }

  std::string new_id(std::string_view prefix);

  /// Appends a snapshot; enforces queued -> running -> {done, failed}.
  void put_job(const JobRecord& job);
  std::optional<JobRecord> job(const std::string& id) const;
  std::vector<JobRecord> jobs() const;
  void delete_job(const std::string& id);

  void put_returns(const std::string& job_id, std::span<const double> returns);
  std::vector<double> returns(const std::string& job_id) const;

  std::string put_prices(const std::string& csv);
  market::PriceTable prices(const std::string& id) const;

  std::string put_portfolio(const market::Portfolio& portfolio);
  market::Portfolio portfolio(const std::string& id) const;

  std::string put_validation(const nlohmann::json& report);
  nlohmann::json validation(const std::string& id) const;

 private:
  void load();
  std::filesystem::path blob(std::string_view kind, const std::string& id, std::string_view ext) const;

  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::map<std::string, JobRecord> jobs_;
  std::uint64_t counter_ = 0;
};

}  // namespace qmcrisk::service
