#include "qmcrisk/risk/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "qmcrisk/error.hpp"
#include "qmcrisk/rand/normal.hpp"

namespace qmcrisk::risk {

std::string_view to_string(Method method) { return method == Method::historical ? "hist" : "mc"; }

Method parse_method(std::string_view name) {
  if (name == "hist" || name == "historical") return Method::historical;
  if (name == "mc" || name == "monte-carlo") return Method::monte_carlo;
  throw Error(ErrorCode::validation, "unknown method '" + std::string(name) + "' (expected hist or mc)");
}

std::string_view to_string(Compounding c) {
  switch (c) {
    case Compounding::sum: return "sum";
    case Compounding::simple: return "simple";
    case Compounding::sqrt_time: return "sqrt-time";
  }
  return "sum";
}

Compounding parse_compounding(std::string_view name) {
  if (name == "sum") return Compounding::sum;
  if (name == "simple") return Compounding::simple;
  if (name == "sqrt-time") return Compounding::sqrt_time;
  throw Error(ErrorCode::validation, "unknown compounding '" + std::string(name) + "'");
}

void RiskJobConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::validation, "alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
  if (horizon_days < 1) throw Error(ErrorCode::validation, "horizon must be at least 1 day");
  if (portfolio.tickers.empty()) throw Error(ErrorCode::validation, "portfolio is empty");
  if (method == Method::historical) {
    if (!history) throw Error(ErrorCode::validation, "historical job needs a return history");
    return;
  }
  if (!calibration) throw Error(ErrorCode::validation, "Monte Carlo job needs calibrated moments");
  const auto need = minimum_paths(alpha);
  if (paths < need) {
    throw Error(ErrorCode::insufficient_paths,
                "paths = " + std::to_string(paths) + " leaves an empty tail at alpha = " + std::to_string(alpha) +
                    "; need at least " + std::to_string(need),
                {{"paths", std::to_string(paths)}, {"required", std::to_string(need)}});
  }
}

RiskReport historical_risk(std::span<const double> series, double alpha, std::uint32_t horizon_days) {
  const auto tail = tail_risk(series, alpha);
  RiskReport r;
  r.var = tail.var;
  r.cvar = tail.cvar;
  r.method = Method::historical;
  r.alpha = alpha;
  r.horizon_days = horizon_days;
  r.paths = series.size();
  r.source_id = "history";
  return r;
}

ScenarioModel make_scenario_model(const market::Moments& moments, const market::Portfolio& portfolio,
                                  std::uint32_t horizon_days, Compounding compounding) {
  const auto m = static_cast<std::size_t>(moments.mean.size());
  if (static_cast<std::size_t>(moments.covariance.rows()) != m || moments.tickers.size() != m) {
    throw Error(ErrorCode::validation, "moments dimensions are inconsistent");
  }
  ScenarioModel model;
  model.assets = m;
  model.horizon = horizon_days;
  model.compounding = compounding;
  model.mean.assign(moments.mean.data(), moments.mean.data() + m);
  model.weights = portfolio.aligned_weights(moments.tickers);
  const market::Matrix lower = moments.chol ? moments.chol->lower : market::cholesky(moments.covariance).lower;
  model.chol.resize(m * m);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < m; ++k) model.chol[j * m + k] = k <= j ? lower(j, k) : 0.0;
  }
  return model;
}

std::vector<double> simulate_scenarios(const market::Moments& moments, const market::Portfolio& portfolio,
                                       std::uint32_t horizon_days, std::uint64_t paths,
                                       qsource::RandomSource& source, Compounding compounding) {
  const auto model = make_scenario_model(moments, portfolio, horizon_days, compounding);
  const std::uint64_t variates = paths * model.variates_per_path();
  auto stream = source.reserve(variates);
  std::vector<double> out(paths);
  simulate_paths_parallel(model, *stream, out);
  return out;
}

RiskRun run_risk_job(const RiskJobConfig& config, qsource::RandomSource* source) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  RiskRun run;
  try {
    if (config.method == Method::historical) {
      run.returns = market::portfolio_series(*config.history, config.portfolio);
      run.report = historical_risk(run.returns, config.alpha, config.horizon_days);
    } else {
      if (source == nullptr) throw Error(ErrorCode::validation, "Monte Carlo job needs a randomness source");
      run.returns = simulate_scenarios(*config.calibration, config.portfolio, config.horizon_days, config.paths,
                                       *source, config.compounding);
      const auto tail = tail_risk(run.returns, config.alpha);
      run.report.var = tail.var;
      run.report.cvar = tail.cvar;
      run.report.method = Method::monte_carlo;
      run.report.alpha = config.alpha;
      run.report.horizon_days = config.horizon_days;
      run.report.paths = config.paths;
      run.report.source_id = source->id();
    }
  } catch (const Error& e) {
    throw e.annotated(std::string(to_string(config.method)) + " job");
  }
  run.report.compounding = config.compounding;
  run.report.elapsed = std::chrono::steady_clock::now() - start;
  return run;
}

PrecisionReport precision_study(const RiskJobConfig& config, std::uint32_t runs, qsource::RandomSource& source) {
  if (runs < 2) throw Error(ErrorCode::validation, "a precision study needs at least 2 runs");
  if (config.method != Method::monte_carlo) {
    throw Error(ErrorCode::validation, "a precision study repeats Monte Carlo jobs");
  }
  PrecisionReport report;
  report.runs = runs;
  for (std::uint32_t i = 0; i < runs; ++i) {
    try {
      const auto run = run_risk_job(config, &source);
      report.per_run.push_back({run.report.var, run.report.cvar});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::entropy_exhausted) throw;
      throw Error(ErrorCode::partial_study,
                  "entropy ran out after " + std::to_string(i) + " of " + std::to_string(runs) + " runs: " + e.what(),
                  {{"completed", std::to_string(i)}, {"requested", std::to_string(runs)}});
    }
  }
  const double k = runs;
  for (const auto& r : report.per_run) {
    report.mean_var += r.var;
    report.mean_cvar += r.cvar;
  }
  report.mean_var /= k;
  report.mean_cvar /= k;
  double sv = 0.0, sc = 0.0;
  for (const auto& r : report.per_run) {
    sv += (r.var - report.mean_var) * (r.var - report.mean_var);
    sc += (r.cvar - report.mean_cvar) * (r.cvar - report.mean_cvar);
  }
  report.std_var = std::sqrt(sv / (k - 1.0));
  report.std_cvar = std::sqrt(sc / (k - 1.0));
  return report;
}

double quantile_estimator_std(double alpha, double sigma, std::uint64_t n) {
  const double z = rand::inverse_normal_cdf(alpha);
  const double density = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return sigma * std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(n)) / density;
}

nlohmann::json to_json(const RiskReport& r) {
  return {{"var", r.var},
          {"cvar", r.cvar},
          {"method", std::string(to_string(r.method))},
          {"alpha", r.alpha},
          {"horizon_days", r.horizon_days},
          {"paths", r.paths},
          {"source_id", r.source_id},
          {"compounding", std::string(to_string(r.compounding))},
          {"elapsed", r.elapsed.count()}};
}

RiskReport risk_report_from_json(const nlohmann::json& j) {
  RiskReport r;
  r.var = j.at("var").get<double>();
  r.cvar = j.at("cvar").get<double>();
  r.method = parse_method(j.at("method").get<std::string>());
  r.alpha = j.at("alpha").get<double>();
  r.horizon_days = j.at("horizon_days").get<std::uint32_t>();
  r.paths = j.at("paths").get<std::uint64_t>();
  r.source_id = j.at("source_id").get<std::string>();
  r.compounding = parse_compounding(j.value("compounding", std::string("sum")));
  r.elapsed = std::chrono::duration<double>(j.value("elapsed", 0.0));
  return r;
}

nlohmann::json to_json(const PrecisionReport& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& t : r.per_run) runs.push_back({{"var", t.var}, {"cvar", t.cvar}});
  return {{"runs", r.runs},     {"per_run", runs},         {"mean_var", r.mean_var},
          {"std_var", r.std_var}, {"mean_cvar", r.mean_cvar}, {"std_cvar", r.std_cvar}};
}

namespace {

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f %%", fraction * 100.0);
  return buf;
}

}  // namespace

std::string format_report(const RiskReport& r) {
  std::ostringstream out;
  out << "method        " << to_string(r.method) << '\n'
      << "source        " << r.source_id << '\n'
      << "alpha         " << r.alpha << '\n'
      << "horizon_days  " << r.horizon_days << '\n'
      << "paths         " << r.paths << '\n'
      << "VaR           " << percent(r.var) << '\n'
      << "CVaR          " << percent(r.cvar) << '\n'
      << "elapsed       " << r.elapsed.count() << " s\n";
  return out.str();
}

std::string format_report(const PrecisionReport& r, const RiskJobConfig& config) {
  std::ostringstream out;
  out << "runs " << r.runs << ", paths " << config.paths << ", alpha " << config.alpha << ", horizon "
      << config.horizon_days << " days, source " << config.source_id << '\n';
  for (std::size_t i = 0; i < r.per_run.size(); ++i) {
    out << "  run " << i + 1 << "  VaR " << percent(r.per_run[i].var) << "  CVaR " << percent(r.per_run[i].cvar)
        << '\n';
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.4f", r.std_var * 100.0);
  out << "VaR   mean " << percent(r.mean_var) << "  std " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.4f", r.std_cvar * 100.0);
  out << "CVaR  mean " << percent(r.mean_cvar) << "  std " << buf << '\n';
  return out.str();
}

Histogram make_histogram(std::span<const double> returns, std::uint32_t bins) {
  if (bins < 1) throw Error(ErrorCode::validation, "histogram needs at least one bin");
  if (returns.empty()) throw Error(ErrorCode::validation, "histogram of an empty series");
  const auto [lo_it, hi_it] = std::minmax_element(returns.begin(), returns.end());
  double lo = *lo_it, hi = *hi_it;
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::uint32_t i = 0; i <= bins; ++i) h.edges[i] = lo + (hi - lo) * i / bins;
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  const double width = (hi - lo) / bins;
  for (double r : returns) {
    auto b = static_cast<std::int64_t>((r - lo) / width);
    b = std::clamp<std::int64_t>(b, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

}  // namespace qmcrisk::risk
