#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qmcrisk::market {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dates x assets table of strictly positive prices.
struct PriceTable {
  std::vector<std::string> tickers;
  std::vector<std::string> dates;  // ISO-8601, strictly increasing
  Matrix prices;                   // rows = dates, cols = tickers
  std::size_t dropped_rows = 0;    // rows removed for missing prices
};

enum class ReturnKind { log, simple };

std::string_view to_string(ReturnKind kind);
ReturnKind parse_return_kind(std::string_view name);

struct ReturnMatrix {
  std::vector<std::string> tickers;
  Matrix returns;  // rows = periods, cols = assets
  ReturnKind kind = ReturnKind::log;
};

struct CholeskyFactor {
  Matrix lower;
  double jitter = 0.0;  // added to every diagonal entry before factoring
};

struct Moments {
  std::vector<std::string> tickers;
  Vector mean;        // per period
  Matrix covariance;  // unbiased, divisor n - 1
  std::optional<CholeskyFactor> chol;
};

/// Tickers with weights normalized to sum to one.
struct Portfolio {
  std::vector<std::string> tickers;
  std::vector<double> weights;

  /// Normalizes; throws ErrorCode::validation on non-finite weights, a zero
  /// sum, a size mismatch, or duplicate tickers.
  static Portfolio make(std::vector<std::string> tickers, std::vector<double> weights);
  /// Uniform(0, 1) draws from a seeded generator, normalized.
  static Portfolio random(std::vector<std::string> tickers, std::uint64_t seed);

  /// Weights reordered to match `tickers`; ErrorCode::not_found for a missing asset.
  std::vector<double> aligned_weights(const std::vector<std::string>& tickers) const;
};

/// CSV: header "date,<ticker>,...", ISO dates, '#' comments. Rows with an
/// empty price cell are dropped and counted.
PriceTable load_prices(const std::filesystem::path& path);
PriceTable parse_prices(const std::string& csv, const std::string& origin = "csv");
std::string format_prices(const PriceTable& table);

ReturnMatrix compute_returns(const PriceTable& prices, ReturnKind kind = ReturnKind::log);

/// Sample mean and unbiased covariance; ErrorCode::insufficient_data below 2 rows.
Moments estimate_moments(const ReturnMatrix& returns);

/// Lower factor of covariance + jitter * I. Jitter is 0 when the matrix is
/// numerically positive definite, else the first of {1e-12, 1e-10, 1e-8} x
/// max diagonal that works. ErrorCode::not_psd if none does.
CholeskyFactor cholesky(const Matrix& covariance);

/// Portfolio file: one "TICKER,weight" per line, '#' comments allowed.
Portfolio load_portfolio(const std::filesystem::path& path);
Portfolio parse_portfolio(const std::string& text);
std::string format_portfolio(const Portfolio& portfolio);

/// Per-period portfolio return series sum_j w_j r_tj.
std::vector<double> portfolio_series(const ReturnMatrix& returns, const Portfolio& portfolio);

/// Seeded one-factor geometric random walk for demos and tests: daily log
/// returns drift + beta * market + idiosyncratic noise.
PriceTable synthesize_prices(std::size_t assets, std::size_t days, std::uint64_t seed);

}  // namespace qmcrisk::market
