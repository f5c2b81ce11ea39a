#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmcrisk/market/market.hpp"
#include "qmcrisk/qsource/variates.hpp"
#include "qmcrisk/risk/estimators.hpp"
#include "qmcrisk/risk/scenario_kernels.hpp"

namespace qmcrisk::risk {

enum class Method { historical, monte_carlo };

std::string_view to_string(Method method);       // "hist" | "mc"
Method parse_method(std::string_view name);      // also accepts "historical", "monte-carlo"
std::string_view to_string(Compounding compounding);  // "sum" | "simple" | "sqrt-time"
Compounding parse_compounding(std::string_view name);

struct RiskJobConfig {
  market::Portfolio portfolio;
  Method method = Method::monte_carlo;
  double alpha = 0.01;
  std::uint32_t horizon_days = 1;
  std::uint64_t paths = 0;  // Monte Carlo only
  std::string source_id;    // Monte Carlo only
  Compounding compounding = Compounding::sum;
  std::shared_ptr<const market::Moments> calibration;   // Monte Carlo
  std::shared_ptr<const market::ReturnMatrix> history;  // historical

  /// Throws ErrorCode::validation (alpha, horizon, missing inputs) or
  /// ErrorCode::insufficient_paths (floor(N * alpha) = 0).
  void validate() const;
};

struct RiskReport {
  double var = 0.0;   // loss as a positive fraction of portfolio value
  double cvar = 0.0;
  Method method = Method::monte_carlo;
  double alpha = 0.0;
  std::uint32_t horizon_days = 1;
  std::uint64_t paths = 0;
  std::string source_id;
  Compounding compounding = Compounding::sum;
  std::chrono::duration<double> elapsed{0.0};
};

/// A finished job: the report plus the simulated (or historical) portfolio returns.
struct RiskRun {
  RiskReport report;
  std::vector<double> returns;
};

struct PrecisionReport {
  std::uint32_t runs = 0;
  std::vector<TailRisk> per_run;
  double mean_var = 0.0;
  double std_var = 0.0;  // sample standard deviation, divisor runs - 1
  double mean_cvar = 0.0;
  double std_cvar = 0.0;
};

/// VaR/CVaR read straight off an empirical return series.
RiskReport historical_risk(std::span<const double> series, double alpha, std::uint32_t horizon_days);

/// Flattens moments and weights into the kernel's layout, computing the
/// Cholesky factor if the moments do not carry one.
ScenarioModel make_scenario_model(const market::Moments& moments, const market::Portfolio& portfolio,
                                  std::uint32_t horizon_days, Compounding compounding);

/// Simulated portfolio returns for `paths` scenarios. Consumes
/// paths * variates_per_path() variates from `source` in one reservation,
/// path-major, day-minor, asset-innermost.
std::vector<double> simulate_scenarios(const market::Moments& moments, const market::Portfolio& portfolio,
                                       std::uint32_t horizon_days, std::uint64_t paths,
                                       qsource::RandomSource& source,
                                       Compounding compounding = Compounding::sum);

/// Validates, runs, and times one job. `source` is required for Monte Carlo.
RiskRun run_risk_job(const RiskJobConfig& config, qsource::RandomSource* source);

/// K repeated Monte Carlo jobs, each on fresh entropy from `source`.
/// ErrorCode::partial_study (with the completed count) if entropy runs out.
PrecisionReport precision_study(const RiskJobConfig& config, std::uint32_t runs,
                                qsource::RandomSource& source);

/// Asymptotic standard deviation of the empirical alpha-quantile of a
/// normal distribution with standard deviation sigma from n draws.
double quantile_estimator_std(double alpha, double sigma, std::uint64_t n);

nlohmann::json to_json(const RiskReport& report);
RiskReport risk_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PrecisionReport& report);

/// Human-readable tables with percentages to 4 decimals.
std::string format_report(const RiskReport& report);
std::string format_report(const PrecisionReport& report, const RiskJobConfig& config);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::uint64_t> counts;
};

/// Equal-width histogram spanning [min, max] of the returns.
Histogram make_histogram(std::span<const double> returns, std::uint32_t bins);

}  // namespace qmcrisk::risk
