#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace qmcrisk::randtest {

struct ChiSquareResult {
  double statistic = 0.0;
  std::uint32_t dof = 0;
  double p_value = 1.0;
};

struct LagCorrelation {
  std::uint32_t lag = 0;
  double r = 0.0;
};

/// Upper tail P(X >= x) of a chi-square variable with `dof` degrees of freedom.
double chi_square_survival(double x, double dof);

/// Regularized upper incomplete gamma Q(a, x): series for x < a + 1,
/// Lentz continued fraction otherwise.
double regularized_gamma_q(double a, double x);

/// Equal-width bin counts on [0, 1); values outside are clamped to the end bins.
std::vector<std::uint64_t> bin_counts(std::span<const double> samples, std::uint32_t bins);

/// Pearson statistic against equal expected counts.
/// Requires bins >= 2 and at least 5 samples per bin (ErrorCode::insufficient_samples).
ChiSquareResult chi_square_uniformity(std::span<const double> samples, std::uint32_t bins);
ChiSquareResult chi_square_from_counts(std::span<const std::uint64_t> counts);

/// Kolmogorov-Smirnov distance to U(0, 1).
double ks_uniform(std::span<const double> samples);

/// Normalized autocorrelation r(k), k = 1..max_lag.
/// ErrorCode::degenerate_series on zero variance.
std::vector<LagCorrelation> autocorrelation(std::span<const double> samples, std::uint32_t max_lag);

/// Shannon entropy in bits of the equal-width-binned empirical distribution.
double binned_entropy(std::span<const double> samples, std::uint32_t bins);

struct BatteryConfig {
  std::uint32_t chi_square_bins = 256;
  std::uint32_t max_lag = 10;
  std::uint32_t entropy_bins = 1u << 16;
  double significance = 0.01;
  double ks_coefficient = 1.63;           // critical D = coefficient / sqrt(n)
  double correlation_band = 3.0;          // |r| < band / sqrt(n)
  double entropy_fraction = 0.99;         // of log2(min(bins, n))
};

struct ValidationReport {
  std::string source_id;
  std::uint64_t sample_count = 0;
  ChiSquareResult chi_square;
  struct {
    double statistic = 0.0;
    double critical_1pct = 0.0;
  } ks;
  std::vector<LagCorrelation> autocorrelation;
  double entropy_bits = 0.0;
  struct {
    bool chi_square = false;
    bool ks = false;
    bool autocorrelation = false;
    bool entropy = false;
    bool overall = false;
  } verdict;
};

/// Runs all four tests; sub-test errors are rethrown annotated with the test name.
ValidationReport run_battery(std::span<const double> samples, const BatteryConfig& config,
                             std::string source_id);

nlohmann::json to_json(const ValidationReport& report);
ValidationReport validation_report_from_json(const nlohmann::json& j);

}  // namespace qmcrisk::randtest
