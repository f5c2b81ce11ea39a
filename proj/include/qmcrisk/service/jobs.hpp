#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qmcrisk/randtest/battery.hpp"
#include "qmcrisk/risk/engine.hpp"
#include "qmcrisk/service/registry.hpp"
#include "qmcrisk/service/store.hpp"

namespace qmcrisk::service {

/// Fixed-size worker set draining a FIFO queue.
class JobExecutor {
 public:
  using Task = std::function<void()>;

  explicit JobExecutor(std::size_t workers);
  ~JobExecutor();
  JobExecutor(const JobExecutor&) = delete;
  JobExecutor& operator=(const JobExecutor&) = delete;

  void post(Task task);
  /// Blocks until the queue is empty and no task is running.
  void drain();

 private:
  void loop();

  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  std::deque<Task> queue_;
  std::size_t active_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
};

struct ServiceConfig {
  std::filesystem::path data_dir = "qmc-data";
  std::string api_key;  // forwarded to remote-http sources
  std::size_t workers = 1;
};

/// Fields of a job request after validation and defaulting.
struct JobRequest {
  std::string prices;
  std::string portfolio;
  risk::Method method = risk::Method::monte_carlo;
  double alpha = 0.01;
  std::uint32_t horizon_days = 1;
  std::uint64_t paths = 0;
  std::string source;
  risk::Compounding compounding = risk::Compounding::sum;
  market::ReturnKind return_kind = market::ReturnKind::log;

  static JobRequest from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Market inputs for a job: the portfolio and the calibration derived from a price table.
struct MarketInputs {
  std::shared_ptr<const market::ReturnMatrix> history;
  std::shared_ptr<const market::Moments> moments;
};

/// Calibrates from prices: returns of `kind`, moments, Cholesky factor.
MarketInputs calibrate(const market::PriceTable& prices, market::ReturnKind kind);

/// Builds the engine config shared by the CLI and the HTTP API.
risk::RiskJobConfig make_job_config(const JobRequest& request, const market::Portfolio& portfolio,
                                    const MarketInputs& inputs);

/// Battery defaults, with optional overrides from a JSON object.
randtest::BatteryConfig battery_config_from_json(const nlohmann::json& j);

/// Engine facade owning the registry, the store, and the executor.
class RiskService {
 public:
  explicit RiskService(ServiceConfig config);
  ~RiskService();

  SourceRegistry& sources() noexcept { return sources_; }
  Store& store() noexcept { return store_; }
  const ServiceConfig& config() const noexcept { return config_; }

  /// Validates synchronously (unknown ids -> not_found, N < 1/alpha ->
  /// insufficient_paths), then queues the job.
  JobRecord submit(const nlohmann::json& request);

  /// Draws `samples` fresh uniforms from the source, runs the battery,
  /// persists the report and links it to the source.
  randtest::ValidationReport validate_source(const std::string& source_id, std::uint64_t samples,
                                             const randtest::BatteryConfig& battery, std::string* report_id = nullptr);

  void wait_idle() { executor_.drain(); }

 private:
  void execute(const std::string& job_id);
  MarketInputs inputs_for(const std::string& prices_id, market::ReturnKind kind);

  ServiceConfig config_;
  SourceRegistry sources_;
  Store store_;
  std::mutex cache_mutex_;
  std::map<std::string, MarketInputs> calibration_cache_;
  JobExecutor executor_;  // last: joins workers before the members they use go away
};

}  // namespace qmcrisk::service
