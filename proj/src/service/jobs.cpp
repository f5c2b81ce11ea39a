#include "qmcrisk/service/jobs.hpp"

#include "qmcrisk/error.hpp"
#include "qmcrisk/rand/pool.hpp"

namespace qmcrisk::service {

JobExecutor::JobExecutor(std::size_t workers) {
  if (workers == 0) workers = 1;
  for (std::size_t i = 0; i < workers; ++i) threads_.emplace_back([this] { loop(); });
}

JobExecutor::~JobExecutor() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  for (auto& t : threads_) t.join();
}

void JobExecutor::post(Task task) {
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(std::move(task));
  }
  wake_.notify_one();
}

void JobExecutor::drain() {
  std::unique_lock lock(mutex_);
  idle_.wait(lock, [this] { return queue_.empty() && active_ == 0; });
}

void JobExecutor::loop() {
  for (;;) {
    Task task;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;  // stopping with nothing left
      task = std::move(queue_.front());
      queue_.pop_front();
      ++active_;
    }
    task();
    {
      std::lock_guard lock(mutex_);
      --active_;
    }
    idle_.notify_all();
  }
}

namespace {

template <typename T>
T field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::validation, std::string("field '") + key + "' has the wrong type", {{"field", key}});
  }
}

nlohmann::json error_json(const Error& e) {
  return {{"code", std::string(to_string(e.code()))}, {"message", e.what()}, {"detail", e.detail()}};
}

}  // namespace

JobRequest JobRequest::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::validation, "job request must be an object");
  JobRequest r;
  r.prices = field<std::string>(j, "prices", "");
  r.portfolio = field<std::string>(j, "portfolio", "");
  r.method = risk::parse_method(field<std::string>(j, "method", "mc"));
  r.alpha = field<double>(j, "alpha", 0.01);
  const auto horizon = field<std::int64_t>(j, "horizon", 1);
  if (horizon < 1) throw Error(ErrorCode::validation, "horizon must be at least 1 day");
  r.horizon_days = static_cast<std::uint32_t>(horizon);
  const auto paths = field<std::int64_t>(j, "paths", 0);
  if (paths < 0) throw Error(ErrorCode::validation, "paths must be non-negative");
  r.paths = static_cast<std::uint64_t>(paths);
  r.source = field<std::string>(j, "source", "");
  r.compounding = risk::parse_compounding(field<std::string>(j, "compounding", "sum"));
  r.return_kind = market::parse_return_kind(field<std::string>(j, "return_kind", "log"));
  if (r.prices.empty()) throw Error(ErrorCode::validation, "job request needs 'prices'");
  if (r.portfolio.empty()) throw Error(ErrorCode::validation, "job request needs 'portfolio'");
  if (r.method == risk::Method::monte_carlo && r.source.empty()) {
    throw Error(ErrorCode::validation, "Monte Carlo job needs 'source'");
  }
  return r;
}

nlohmann::json JobRequest::to_json() const {
  nlohmann::json j = {{"prices", prices},
                      {"portfolio", portfolio},
                      {"method", std::string(risk::to_string(method))},
                      {"alpha", alpha},
                      {"horizon", horizon_days},
                      {"return_kind", std::string(market::to_string(return_kind))}};
  if (method == risk::Method::monte_carlo) {
    j["paths"] = paths;
    j["source"] = source;
    j["compounding"] = std::string(risk::to_string(compounding));
  }
  return j;
}

MarketInputs calibrate(const market::PriceTable& prices, market::ReturnKind kind) {
  auto returns = std::make_shared<market::ReturnMatrix>(market::compute_returns(prices, kind));
  auto moments = std::make_shared<market::Moments>(market::estimate_moments(*returns));
  moments->chol = market::cholesky(moments->covariance);
  return {std::move(returns), std::move(moments)};
}

risk::RiskJobConfig make_job_config(const JobRequest& request, const market::Portfolio& portfolio,
                                    const MarketInputs& inputs) {
  risk::RiskJobConfig config;
  config.portfolio = portfolio;
  config.method = request.method;
  config.alpha = request.alpha;
  config.horizon_days = request.horizon_days;
  config.paths = request.paths;
  config.source_id = request.source;
  config.compounding = request.compounding;
  config.calibration = inputs.moments;
  config.history = inputs.history;
  // Fail early on assets without history.
  portfolio.aligned_weights(inputs.history->tickers);
  config.validate();
  return config;
}

randtest::BatteryConfig battery_config_from_json(const nlohmann::json& j) {
  randtest::BatteryConfig c;
  if (!j.is_object()) return c;
  c.chi_square_bins = field<std::uint32_t>(j, "chi_square_bins", c.chi_square_bins);
  c.max_lag = field<std::uint32_t>(j, "max_lag", c.max_lag);
  c.entropy_bins = field<std::uint32_t>(j, "entropy_bins", c.entropy_bins);
  if (c.chi_square_bins < 2 || c.entropy_bins < 2) throw Error(ErrorCode::validation, "battery needs at least 2 bins");
  return c;
}

RiskService::RiskService(ServiceConfig config)
    : config_(std::move(config)),
      sources_(config_.data_dir / "sources.json", qsource::SourceContext{config_.api_key, config_.data_dir}),
      store_(config_.data_dir),
      executor_(config_.workers) {}

RiskService::~RiskService() = default;

MarketInputs RiskService::inputs_for(const std::string& prices_id, market::ReturnKind kind) {
  const std::string key = prices_id + "/" + std::string(market::to_string(kind));
  {
    std::lock_guard lock(cache_mutex_);
    auto it = calibration_cache_.find(key);
    if (it != calibration_cache_.end()) return it->second;
  }
  auto inputs = calibrate(store_.prices(prices_id), kind);
  std::lock_guard lock(cache_mutex_);
  calibration_cache_[key] = inputs;
  return inputs;
}

JobRecord RiskService::submit(const nlohmann::json& body) {
  const auto request = JobRequest::from_json(body);
  const auto portfolio = store_.portfolio(request.portfolio);
  if (request.method == risk::Method::monte_carlo && !sources_.contains(request.source)) {
    throw Error(ErrorCode::not_found, "unknown source '" + request.source + "'", {{"source", request.source}});
  }
  const auto inputs = inputs_for(request.prices, request.return_kind);
  make_job_config(request, portfolio, inputs);

  JobRecord job;
  job.id = store_.new_id("job");
  job.config = request.to_json();
  job.status = JobStatus::queued;
  job.created = rand::utc_timestamp_now();
  store_.put_job(job);
  executor_.post([this, id = job.id] { execute(id); });
  return job;
}

void RiskService::execute(const std::string& job_id) {
  auto job = *store_.job(job_id);
  job.status = JobStatus::running;
  store_.put_job(job);
  try {
    const auto request = JobRequest::from_json(job.config);
    const auto config = make_job_config(request, store_.portfolio(request.portfolio),
                                        inputs_for(request.prices, request.return_kind));
    std::shared_ptr<qsource::RandomSource> source;
    if (request.method == risk::Method::monte_carlo) source = sources_.open(request.source);
    auto run = risk::run_risk_job(config, source.get());
    store_.put_returns(job_id, run.returns);
    job.result = run.report;
    job.status = JobStatus::done;
  } catch (const Error& e) {
    job.error = error_json(e);
    job.status = JobStatus::failed;
  } catch (const std::exception& e) {
    job.error = nlohmann::json{{"code", "internal"}, {"message", e.what()}, {"detail", nlohmann::json::object()}};
    job.status = JobStatus::failed;
  }
  job.finished = rand::utc_timestamp_now();
  store_.put_job(job);
}

randtest::ValidationReport RiskService::validate_source(const std::string& source_id, std::uint64_t samples,
                                                        const randtest::BatteryConfig& battery,
                                                        std::string* report_id) {
  sources_.get(source_id);
  const std::uint64_t minimum = std::max<std::uint64_t>(5ull * battery.chi_square_bins, battery.max_lag + 2ull);
  if (samples < minimum) {
    throw Error(ErrorCode::validation,
                "battery needs at least " + std::to_string(minimum) + " samples, got " + std::to_string(samples),
                {{"required", std::to_string(minimum)}, {"requested", std::to_string(samples)}});
  }
  auto source = sources_.open(source_id);
  const auto values = qsource::draw_uniforms(*source, samples);
  auto report = randtest::run_battery(values, battery, source_id);
  const auto id = store_.put_validation(randtest::to_json(report));
  sources_.link_report(source_id, id);
  if (report_id) *report_id = id;
  return report;
}

}  // namespace qmcrisk::service
