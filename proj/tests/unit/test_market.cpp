#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "qmcrisk/market/market.hpp"
#include "support.hpp"

namespace qmcrisk::market {
namespace {

using qmcrisk::testing::expect_error;
using qmcrisk::testing::TempDir;

ReturnMatrix returns_of(std::vector<std::vector<double>> rows) {
  ReturnMatrix r;
  const auto cols = rows.front().size();
  for (std::size_t j = 0; j < cols; ++j) r.tickers.push_back("A" + std::to_string(j));
  r.returns.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) r.returns(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return r;
}

TEST(Prices, ParsesWellFormedTable) {
  const auto t = parse_prices("date,AAA,BBB\n2024-01-02,10,20\n2024-01-03,11,21\n2024-01-04,12,19.5\n");
  EXPECT_EQ(t.tickers, (std::vector<std::string>{"AAA", "BBB"}));
  EXPECT_EQ(t.dates.size(), 3u);
  EXPECT_EQ(t.prices.rows(), 3);
  EXPECT_EQ(t.prices.cols(), 2);
  EXPECT_EQ(t.prices(2, 1), 19.5);
}

TEST(Prices, NonPositivePriceNamesCell) {
  const auto e = expect_error(ErrorCode::data, [] { parse_prices("date,AAA,BBB\n2024-01-02,10,20\n2024-01-03,0,21\n"); });
  EXPECT_EQ(e.detail().at("date"), "2024-01-03");
  EXPECT_EQ(e.detail().at("ticker"), "AAA");
}

TEST(Prices, ShuffledDatesAreOrderingError) {
  expect_error(ErrorCode::ordering, [] { parse_prices("date,A\n2024-01-03,1\n2024-01-02,2\n2024-01-04,3\n"); });
  expect_error(ErrorCode::ordering, [] { parse_prices("date,A\n2024-01-03,1\n2024-01-03,2\n"); });
}

TEST(Prices, MissingCellsDropRows) {
  const auto t = parse_prices("date,A,B\n# comment\n2024-01-02,1,2\n2024-01-03,,2\n2024-01-04,1.5,2.5\n");
  EXPECT_EQ(t.dates.size(), 2u);
  EXPECT_EQ(t.dropped_rows, 1u);
}

TEST(Prices, FormatRoundTrips) {
  const auto t = synthesize_prices(3, 20, 9);
  const auto back = parse_prices(format_prices(t));
  EXPECT_EQ(back.tickers, t.tickers);
  EXPECT_EQ(back.dates, t.dates);
  EXPECT_EQ(back.prices, t.prices);
}

TEST(Prices, LoadFromFile) {
  TempDir dir;
  std::ofstream(dir / "p.csv") << "date,X\n2024-01-02,5\n2024-01-03,6\n";
  EXPECT_EQ(load_prices(dir / "p.csv").prices(1, 0), 6.0);
  expect_error(ErrorCode::not_found, [&] { load_prices(dir / "missing.csv"); });
}

TEST(Returns, Examples) {
  const auto t = parse_prices("date,A,B\n2024-01-02,100,100\n2024-01-03,110,100\n");
  const auto simple = compute_returns(t, ReturnKind::simple);
  EXPECT_NEAR(simple.returns(0, 0), 0.10, 1e-15);
  const auto log = compute_returns(t, ReturnKind::log);
  EXPECT_EQ(log.returns(0, 1), 0.0);
  EXPECT_NEAR(log.returns(0, 0), 0.0953102, 1e-7);
  EXPECT_EQ(log.returns.rows(), 1);
}

TEST(Returns, RowCountIsPricesMinusOne) {
  const auto t = synthesize_prices(4, 50, 1);
  EXPECT_EQ(compute_returns(t).returns.rows(), 49);
}

TEST(Moments, HandComputedCase) {
  const auto m = estimate_moments(returns_of({{1, 0}, {-1, 0}}));
  EXPECT_EQ(m.mean(0), 0.0);
  EXPECT_EQ(m.mean(1), 0.0);
  EXPECT_EQ(m.covariance(0, 0), 2.0);
  EXPECT_EQ(m.covariance(0, 1), 0.0);
  EXPECT_EQ(m.covariance(1, 1), 0.0);
}

TEST(Moments, IdenticalColumnsArePerfectlyCorrelated) {
  const auto m = estimate_moments(returns_of({{0.01, 0.01}, {-0.02, -0.02}, {0.03, 0.03}}));
  EXPECT_DOUBLE_EQ(m.covariance(0, 0), m.covariance(1, 1));
  EXPECT_DOUBLE_EQ(m.covariance(0, 0), m.covariance(0, 1));
}

TEST(Moments, ConstantColumnHasZeroVariance) {
  const auto m = estimate_moments(returns_of({{0.01, 0.5}, {-0.02, 0.5}, {0.03, 0.5}}));
  EXPECT_EQ(m.covariance(1, 1), 0.0);
}

TEST(Moments, SingleRowIsInsufficient) {
  expect_error(ErrorCode::insufficient_data, [] { estimate_moments(returns_of({{0.1, 0.2}})); });
}

TEST(Moments, MatchesBruteForceLoops) {
  std::mt19937_64 g(4);
  std::normal_distribution<double> nd(0.0, 0.02);
  std::vector<std::vector<double>> rows(60, std::vector<double>(5));
  for (auto& r : rows) {
    for (auto& v : r) v = nd(g);
  }
  const auto m = estimate_moments(returns_of(rows));
  const std::size_t n = rows.size();
  for (std::size_t a = 0; a < 5; ++a) {
    double mean_a = 0;
    for (const auto& r : rows) mean_a += r[a];
    mean_a /= n;
    EXPECT_NEAR(m.mean(static_cast<Eigen::Index>(a)), mean_a, 1e-15);
    for (std::size_t b = 0; b < 5; ++b) {
      double mean_b = 0;
      for (const auto& r : rows) mean_b += r[b];
      mean_b /= n;
      double s = 0;
      for (const auto& r : rows) s += (r[a] - mean_a) * (r[b] - mean_b);
      EXPECT_NEAR(m.covariance(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), s / (n - 1), 1e-15);
    }
  }
  EXPECT_EQ(m.covariance, m.covariance.transpose());
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_GE(m.covariance(i, i), 0.0);
}

TEST(Cholesky, Identity) {
  const auto f = cholesky(Matrix::Identity(3, 3));
  EXPECT_EQ(f.lower, Matrix::Identity(3, 3));
  EXPECT_EQ(f.jitter, 0.0);
}

TEST(Cholesky, HandFactor) {
  Matrix a(2, 2);
  a << 4, 2, 2, 3;
  const auto f = cholesky(a);
  EXPECT_NEAR(f.lower(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(f.lower(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(f.lower(1, 1), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(f.lower(0, 1), 0.0);
}

TEST(Cholesky, IndefiniteMatrixIsRejected) {
  Matrix a(2, 2);
  a << 1, 2, 2, 1;
  expect_error(ErrorCode::not_psd, [&] { cholesky(a); });
}

TEST(Cholesky, SingularPsdNeedsJitterAndReproduces) {
  Matrix a(3, 3);
  a << 1e-4, 1e-4, 0, 1e-4, 1e-4, 0, 0, 0, 2e-4;
  const auto f = cholesky(a);
  const Matrix target = a + f.jitter * Matrix::Identity(3, 3);
  EXPECT_LE((f.lower * f.lower.transpose() - target).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(f.jitter, 1e-8 * 2e-4);
}

TEST(Cholesky, ZeroMatrixGivesZeroFactor) {
  const auto f = cholesky(Matrix::Zero(2, 2));
  EXPECT_EQ(f.lower, Matrix::Zero(2, 2));
}

TEST(Cholesky, ReproducesRandomCovariances) {
  std::mt19937_64 g(6);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial * 4;
    Matrix x(n + 5, n);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < n; ++j) x(i, j) = nd(g) * 0.01;
    }
    const Matrix cov = x.transpose() * x / (x.rows() - 1.0);
    const auto f = cholesky(cov);
    EXPECT_LE((f.lower * f.lower.transpose() - cov - f.jitter * Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE(f.lower.isLowerTriangular());
  }
}

TEST(Portfolio, NormalizesWeights) {
  const auto p = Portfolio::make({"A", "B", "C"}, {1, 1, 2});
  EXPECT_DOUBLE_EQ(p.weights[2], 0.5);
  double sum = 0;
  for (double w : p.weights) sum += w;
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(Portfolio, RejectsBadInput) {
  expect_error(ErrorCode::validation, [] { Portfolio::make({"A", "B"}, {1.0}); });
  expect_error(ErrorCode::validation, [] { Portfolio::make({"A", "A"}, {1.0, 1.0}); });
  expect_error(ErrorCode::validation, [] { Portfolio::make({"A", "B"}, {1.0, -1.0}); });
  expect_error(ErrorCode::validation, [] { Portfolio::make({"A"}, {NAN}); });
}

TEST(Portfolio, RandomWeightsAreSeeded) {
  const std::vector<std::string> t = {"A", "B", "C", "D"};
  EXPECT_EQ(Portfolio::random(t, 5).weights, Portfolio::random(t, 5).weights);
  EXPECT_NE(Portfolio::random(t, 5).weights, Portfolio::random(t, 6).weights);
}

TEST(Portfolio, AlignsToTickerOrder) {
  const auto p = Portfolio::make({"B", "A"}, {0.25, 0.75});
  EXPECT_EQ(p.aligned_weights({"A", "B"}), (std::vector<double>{0.75, 0.25}));
  expect_error(ErrorCode::not_found, [&] { p.aligned_weights({"A", "C"}); });
}

TEST(Portfolio, FileFormatRoundTrips) {
  const auto p = parse_portfolio("# weights\nAAA,0.6\nBBB,0.4\n");
  EXPECT_EQ(p.tickers, (std::vector<std::string>{"AAA", "BBB"}));
  const auto back = parse_portfolio(format_portfolio(p));
  EXPECT_EQ(back.tickers, p.tickers);
  EXPECT_EQ(back.weights, p.weights);
  expect_error(ErrorCode::validation, [] { parse_portfolio("AAA;0.6\n"); });
}

TEST(PortfolioSeries, WeightedSumPerPeriod) {
  const auto r = returns_of({{0.01, 0.03}, {-0.02, 0.00}});
  const auto series = portfolio_series(r, Portfolio::make({"A1", "A0"}, {0.5, 0.5}));
  EXPECT_NEAR(series[0], 0.02, 1e-15);
  EXPECT_NEAR(series[1], -0.01, 1e-15);
}

TEST(Synthesize, DeterministicAndPositive) {
  const auto a = synthesize_prices(5, 100, 3);
  const auto b = synthesize_prices(5, 100, 3);
  EXPECT_EQ(a.prices, b.prices);
  EXPECT_GT(a.prices.minCoeff(), 0.0);
  EXPECT_EQ(a.tickers.front(), "SYN00");
  EXPECT_EQ(a.dates.front(), "2020-01-01");
}

}  // namespace
}  // namespace qmcrisk::market
