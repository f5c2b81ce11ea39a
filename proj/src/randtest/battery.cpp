#include "qmcrisk/randtest/battery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qmcrisk/error.hpp"

namespace qmcrisk::randtest {
namespace {

constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

Error too_few(const std::string& what, std::uint64_t required, std::uint64_t got) {
  return Error(ErrorCode::insufficient_samples,
               what + " needs at least " + std::to_string(required) + " samples, got " +
                   std::to_string(got),
               {{"required", std::to_string(required)}, {"available", std::to_string(got)}});
}

double gamma_p_series(double a, double x) {
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int i = 0; i < kMaxIter; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

std::uint32_t bin_of(double v, std::uint32_t bins) {
  if (!(v > 0.0)) return 0;
  const auto b = static_cast<std::uint64_t>(v * bins);
  return static_cast<std::uint32_t>(std::min<std::uint64_t>(b, bins - 1));
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw Error(ErrorCode::domain, "regularized_gamma_q needs a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return std::clamp(1.0 - gamma_p_series(a, x), 0.0, 1.0);
  return std::clamp(gamma_q_fraction(a, x), 0.0, 1.0);
}

double chi_square_survival(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return regularized_gamma_q(0.5 * dof, 0.5 * x);
}

std::vector<std::uint64_t> bin_counts(std::span<const double> samples, std::uint32_t bins) {
  std::vector<std::uint64_t> counts(bins, 0);
  for (double v : samples) ++counts[bin_of(v, bins)];
  return counts;
}

ChiSquareResult chi_square_from_counts(std::span<const std::uint64_t> counts) {
  if (counts.size() < 2) throw Error(ErrorCode::domain, "chi-square needs at least 2 bins");
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  const double expected = static_cast<double>(n) / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) {
    const double diff = static_cast<double>(c) - expected;
    stat += diff * diff / expected;
  }
  ChiSquareResult r;
  r.statistic = stat;
  r.dof = static_cast<std::uint32_t>(counts.size() - 1);
  r.p_value = chi_square_survival(stat, r.dof);
  return r;
}

ChiSquareResult chi_square_uniformity(std::span<const double> samples, std::uint32_t bins) {
  if (bins < 2) throw Error(ErrorCode::domain, "chi-square needs at least 2 bins");
  const std::uint64_t required = 5ull * bins;
  if (samples.size() < required) throw too_few("chi-square uniformity", required, samples.size());
  const auto counts = bin_counts(samples, bins);
  return chi_square_from_counts(counts);
}

double ks_uniform(std::span<const double> samples) {
  if (samples.empty()) throw too_few("Kolmogorov-Smirnov", 1, 0);
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double x = std::clamp(sorted[i], 0.0, 1.0);
    const double above = static_cast<double>(i + 1) / n - x;
    const double below = x - static_cast<double>(i) / n;
    d = std::max({d, std::fabs(above), std::fabs(below)});
  }
  return d;
}

std::vector<LagCorrelation> autocorrelation(std::span<const double> samples, std::uint32_t max_lag) {
  const std::size_t n = samples.size();
  if (n <= static_cast<std::size_t>(max_lag) + 1) {
    throw too_few("autocorrelation", static_cast<std::uint64_t>(max_lag) + 2, n);
  }
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  double denom = 0.0;
  for (double v : samples) denom += (v - mean) * (v - mean);
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (*lo == *hi || !(denom > 0.0)) throw Error(ErrorCode::degenerate_series, "series has zero variance");

  std::vector<LagCorrelation> out;
  out.reserve(max_lag);
  for (std::uint32_t k = 1; k <= max_lag; ++k) {
    double num = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) num += (samples[t] - mean) * (samples[t + k] - mean);
    out.push_back({k, num / denom});
  }
  return out;
}

double binned_entropy(std::span<const double> samples, std::uint32_t bins) {
  if (bins < 2) throw Error(ErrorCode::domain, "entropy needs at least 2 bins");
  if (samples.empty()) throw too_few("binned entropy", 1, 0);
  const auto counts = bin_counts(samples, bins);
  const double n = static_cast<double>(samples.size());
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

ValidationReport run_battery(std::span<const double> samples, const BatteryConfig& config,
                             std::string source_id) {
  ValidationReport report;
  report.source_id = std::move(source_id);
  report.sample_count = samples.size();
  const double n = static_cast<double>(samples.size());

  try {
    report.chi_square = chi_square_uniformity(samples, config.chi_square_bins);
  } catch (const Error& e) {
    throw e.annotated("chi_square");
  }
  try {
    report.ks.statistic = ks_uniform(samples);
  } catch (const Error& e) {
    throw e.annotated("ks");
  }
  report.ks.critical_1pct = config.ks_coefficient / std::sqrt(n);
  try {
    report.autocorrelation = autocorrelation(samples, config.max_lag);
  } catch (const Error& e) {
    throw e.annotated("autocorrelation");
  }
  try {
    report.entropy_bits = binned_entropy(samples, config.entropy_bins);
  } catch (const Error& e) {
    throw e.annotated("entropy");
  }

  const double band = config.correlation_band / std::sqrt(n);
  const double effective_bins = std::min<double>(config.entropy_bins, n);

  report.verdict.chi_square = report.chi_square.p_value >= config.significance;
  report.verdict.ks = report.ks.statistic < report.ks.critical_1pct;
  report.verdict.autocorrelation =
      std::all_of(report.autocorrelation.begin(), report.autocorrelation.end(),
                  [band](const LagCorrelation& c) { return std::fabs(c.r) < band; });
  report.verdict.entropy = report.entropy_bits >= config.entropy_fraction * std::log2(effective_bins);
  report.verdict.overall = report.verdict.chi_square && report.verdict.ks &&
                           report.verdict.autocorrelation && report.verdict.entropy;
  return report;
}

nlohmann::json to_json(const ValidationReport& r) {
  nlohmann::json ac = nlohmann::json::array();
  for (const auto& c : r.autocorrelation) ac.push_back({{"lag", c.lag}, {"r", c.r}});
  return {
      {"source_id", r.source_id},
      {"sample_count", r.sample_count},
      {"chi_square",
       {{"statistic", r.chi_square.statistic}, {"dof", r.chi_square.dof}, {"p_value", r.chi_square.p_value}}},
      {"ks", {{"statistic", r.ks.statistic}, {"critical_1pct", r.ks.critical_1pct}}},
      {"autocorrelation", ac},
      {"entropy_bits", r.entropy_bits},
      {"verdict",
       {{"chi_square", r.verdict.chi_square},
        {"ks", r.verdict.ks},
        {"autocorrelation", r.verdict.autocorrelation},
        {"entropy", r.verdict.entropy},
        {"overall", r.verdict.overall}}},
  };
}

ValidationReport validation_report_from_json(const nlohmann::json& j) {
  ValidationReport r;
  r.source_id = j.at("source_id").get<std::string>();
  r.sample_count = j.at("sample_count").get<std::uint64_t>();
  r.chi_square.statistic = j.at("chi_square").at("statistic").get<double>();
  r.chi_square.dof = j.at("chi_square").at("dof").get<std::uint32_t>();
  r.chi_square.p_value = j.at("chi_square").at("p_value").get<double>();
  r.ks.statistic = j.at("ks").at("statistic").get<double>();
  r.ks.critical_1pct = j.at("ks").at("critical_1pct").get<double>();
  for (const auto& c : j.at("autocorrelation")) {
    r.autocorrelation.push_back({c.at("lag").get<std::uint32_t>(), c.at("r").get<double>()});
  }
  r.entropy_bits = j.at("entropy_bits").get<double>();
  const auto& v = j.at("verdict");
  r.verdict.chi_square = v.at("chi_square").get<bool>();
  r.verdict.ks = v.at("ks").get<bool>();
  r.verdict.autocorrelation = v.at("autocorrelation").get<bool>();
  r.verdict.entropy = v.at("entropy").get<bool>();
  r.verdict.overall = v.at("overall").get<bool>();
  return r;
}

}  // namespace qmcrisk::randtest
