#include "qmcrisk/market/market.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "qmcrisk/error.hpp"

namespace qmcrisk::market {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "cannot open " + path.string(), {{"path", path.string()}});
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::string_view to_string(ReturnKind kind) { return kind == ReturnKind::log ? "log" : "simple"; }

ReturnKind parse_return_kind(std::string_view name) {
  if (name == "log") return ReturnKind::log;
  if (name == "simple") return ReturnKind::simple;
  throw Error(ErrorCode::validation, "unknown return kind '" + std::string(name) + "'");
}

PriceTable parse_prices(const std::string& csv, const std::string& origin) {
  static const std::regex iso_date(R"(^\d{4}-\d{2}-\d{2}([T ][0-9:.+\-Z]*)?$)");
  std::istringstream in(csv);
  std::string line;
  std::size_t line_no = 0;
  PriceTable table;
  std::vector<std::vector<double>> rows;
  bool have_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto cells = split_csv(line);
    for (auto& c : cells) c = trim(c);
    if (!have_header) {
      if (cells.size() < 2 || cells[0] != "date") {
        throw Error(ErrorCode::data, origin + ": header must be 'date,<ticker>,...'");
      }
      table.tickers.assign(cells.begin() + 1, cells.end());
      std::set<std::string> seen(table.tickers.begin(), table.tickers.end());
      if (seen.size() != table.tickers.size()) throw Error(ErrorCode::data, origin + ": duplicate ticker in header");
      have_header = true;
      continue;
    }
    if (cells.size() != table.tickers.size() + 1) {
      throw Error(ErrorCode::data,
                  origin + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(table.tickers.size() + 1),
                  {{"line", std::to_string(line_no)}});
    }
    if (!std::regex_match(cells[0], iso_date)) {
      throw Error(ErrorCode::data, origin + ": line " + std::to_string(line_no) + " has a non-ISO date '" + cells[0] + "'",
                  {{"line", std::to_string(line_no)}});
    }
    std::vector<double> row;
    bool missing = false;
    for (std::size_t j = 1; j < cells.size(); ++j) {
      if (cells[j].empty() || cells[j] == "NA" || cells[j] == "NaN") {
        missing = true;
        continue;
      }
      double price = 0.0;
      try {
        std::size_t used = 0;
        price = std::stod(cells[j], &used);
        if (used != cells[j].size()) throw std::invalid_argument(cells[j]);
      } catch (const std::exception&) {
        throw Error(ErrorCode::data,
                    origin + ": unparsable price '" + cells[j] + "' at " + cells[0] + "/" + table.tickers[j - 1],
                    {{"date", cells[0]}, {"ticker", table.tickers[j - 1]}});
      }
      if (!(price > 0.0) || !std::isfinite(price)) {
        throw Error(ErrorCode::data,
                    origin + ": non-positive price " + cells[j] + " at " + cells[0] + "/" + table.tickers[j - 1],
                    {{"date", cells[0]}, {"ticker", table.tickers[j - 1]}, {"line", std::to_string(line_no)}});
      }
      row.push_back(price);
    }
    if (missing) {
      ++table.dropped_rows;
      continue;
    }
    if (!table.dates.empty() && !(table.dates.back() < cells[0])) {
      throw Error(ErrorCode::ordering,
                  origin + ": date " + cells[0] + " does not follow " + table.dates.back(),
                  {{"date", cells[0]}, {"line", std::to_string(line_no)}});
    }
    table.dates.push_back(cells[0]);
    rows.push_back(std::move(row));
  }
  if (!have_header) throw Error(ErrorCode::data, origin + ": empty price file");

  table.prices.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.tickers.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) table.prices(i, j) = rows[i][j];
  }
  return table;
}

PriceTable load_prices(const std::filesystem::path& path) { return parse_prices(read_file(path), path.string()); }

namespace {

std::string shortest(double v) {
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::string(buf, end);
}

}  // namespace

std::string format_prices(const PriceTable& table) {
  std::ostringstream out;
  out << "date";
  for (const auto& t : table.tickers) out << ',' << t;
  out << '\n';
  for (Eigen::Index i = 0; i < table.prices.rows(); ++i) {
    out << table.dates[i];
    for (Eigen::Index j = 0; j < table.prices.cols(); ++j) out << ',' << shortest(table.prices(i, j));
    out << '\n';
  }
  return out.str();
}

ReturnMatrix compute_returns(const PriceTable& prices, ReturnKind kind) {
  const auto rows = prices.prices.rows();
  if (rows < 2) {
    throw Error(ErrorCode::insufficient_data, "returns need at least 2 dates, got " + std::to_string(rows));
  }
  ReturnMatrix out;
  out.tickers = prices.tickers;
  out.kind = kind;
  out.returns.resize(rows - 1, prices.prices.cols());
  for (Eigen::Index t = 1; t < rows; ++t) {
    for (Eigen::Index j = 0; j < prices.prices.cols(); ++j) {
      const double ratio = prices.prices(t, j) / prices.prices(t - 1, j);
      out.returns(t - 1, j) = kind == ReturnKind::log ? std::log(ratio) : ratio - 1.0;
    }
  }
  return out;
}

Moments estimate_moments(const ReturnMatrix& returns) {
  const auto n = returns.returns.rows();
  if (n < 2) {
    throw Error(ErrorCode::insufficient_data, "moments need at least 2 return rows, got " + std::to_string(n),
                {{"rows", std::to_string(n)}});
  }
  Moments m;
  m.tickers = returns.tickers;
  m.mean = returns.returns.colwise().mean().transpose();
  const Matrix centered = returns.returns.rowwise() - m.mean.transpose();
  m.covariance = (centered.transpose() * centered) / static_cast<double>(n - 1);
  // Exact symmetry regardless of the product's rounding.
  m.covariance = 0.5 * (m.covariance + m.covariance.transpose()).eval();
  return m;
}

CholeskyFactor cholesky(const Matrix& covariance) {
  if (covariance.rows() != covariance.cols()) {
    throw Error(ErrorCode::validation, "covariance must be square");
  }
  const double scale = covariance.cwiseAbs().maxCoeff();
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0)) {
    throw Error(ErrorCode::validation, "covariance must be symmetric");
  }
  const auto n = covariance.rows();
  if (n == 0 || scale == 0.0) return {Matrix::Zero(n, n), 0.0};

  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};

  const double max_diag = covariance.diagonal().maxCoeff();
  for (double factor : {1e-12, 1e-10, 1e-8}) {
    const double jitter = factor * max_diag;
    if (!(jitter > 0.0)) break;
    Matrix shifted = covariance;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
  }
  throw Error(ErrorCode::not_psd, "covariance is not positive semidefinite (factorization failed at jitter 1e-8 x max diagonal)");
}

Portfolio Portfolio::make(std::vector<std::string> tickers, std::vector<double> weights) {
  if (tickers.size() != weights.size() || tickers.empty()) {
    throw Error(ErrorCode::validation, "portfolio needs one weight per ticker and at least one asset");
  }
  std::set<std::string> seen(tickers.begin(), tickers.end());
  if (seen.size() != tickers.size()) throw Error(ErrorCode::validation, "portfolio has duplicate tickers");
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w)) throw Error(ErrorCode::validation, "portfolio weight is not finite");
    sum += w;
  }
  if (sum == 0.0 || !std::isfinite(sum)) throw Error(ErrorCode::validation, "portfolio weights sum to zero");
  for (double& w : weights) w /= sum;
  return Portfolio{std::move(tickers), std::move(weights)};
}

Portfolio Portfolio::random(std::vector<std::string> tickers, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::vector<double> weights(tickers.size());
  for (double& w : weights) w = static_cast<double>(engine() >> 11) * 0x1p-53 + 0x1p-54;
  return make(std::move(tickers), std::move(weights));
}

std::vector<double> Portfolio::aligned_weights(const std::vector<std::string>& order) const {
  std::vector<double> out(order.size(), 0.0);
  for (std::size_t i = 0; i < tickers.size(); ++i) {
    auto it = std::find(order.begin(), order.end(), tickers[i]);
    if (it == order.end()) {
      throw Error(ErrorCode::not_found, "portfolio asset " + tickers[i] + " has no price history",
                  {{"ticker", tickers[i]}});
    }
    out[static_cast<std::size_t>(it - order.begin())] = weights[i];
  }
  return out;
}

Portfolio parse_portfolio(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> tickers;
  std::vector<double> weights;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto cells = split_csv(line);
    if (cells.size() != 2) {
      throw Error(ErrorCode::validation, "portfolio line " + std::to_string(line_no) + " must be TICKER,weight",
                  {{"line", std::to_string(line_no)}});
    }
    try {
      std::size_t used = 0;
      const std::string w = trim(cells[1]);
      weights.push_back(std::stod(w, &used));
      if (used != w.size()) throw std::invalid_argument(w);
    } catch (const std::exception&) {
      throw Error(ErrorCode::validation, "portfolio line " + std::to_string(line_no) + " has a bad weight",
                  {{"line", std::to_string(line_no)}});
    }
    tickers.push_back(trim(cells[0]));
  }
  return Portfolio::make(std::move(tickers), std::move(weights));
}

Portfolio load_portfolio(const std::filesystem::path& path) { return parse_portfolio(read_file(path)); }

std::string format_portfolio(const Portfolio& portfolio) {
  std::ostringstream out;
  for (std::size_t i = 0; i < portfolio.tickers.size(); ++i) {
    out << portfolio.tickers[i] << ',' << shortest(portfolio.weights[i]) << '\n';
  }
  return out.str();
}

std::vector<double> portfolio_series(const ReturnMatrix& returns, const Portfolio& portfolio) {
  const auto w = portfolio.aligned_weights(returns.tickers);
  std::vector<double> series(static_cast<std::size_t>(returns.returns.rows()));
  for (Eigen::Index t = 0; t < returns.returns.rows(); ++t) {
    double r = 0.0;
    for (Eigen::Index j = 0; j < returns.returns.cols(); ++j) r += w[j] * returns.returns(t, j);
    series[t] = r;
  }
  return series;
}

PriceTable synthesize_prices(std::size_t assets, std::size_t days, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  PriceTable table;
  std::vector<double> beta(assets), vol(assets), drift(assets), price(assets);
  for (std::size_t j = 0; j < assets; ++j) {
    std::ostringstream name;
    name << "SYN" << std::setw(2) << std::setfill('0') << j;
    table.tickers.push_back(name.str());
    beta[j] = 0.6 + 0.8 * unif(engine);
    vol[j] = 0.008 + 0.012 * unif(engine);
    drift[j] = 0.0002 + 0.0004 * unif(engine);
    price[j] = 20.0 + 180.0 * unif(engine);
  }
  const double market_vol = 0.01;
  table.prices.resize(static_cast<Eigen::Index>(days), static_cast<Eigen::Index>(assets));
  // Business-day-like calendar starting 2020-01-01; only ordering matters.
  int y = 2020, m = 1, d = 1;
  auto days_in = [](int year, int month) {
    static const int md[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    return month == 2 && leap ? 29 : md[month - 1];
  };
  for (std::size_t t = 0; t < days; ++t) {
    std::ostringstream date;
    date << y << '-' << std::setw(2) << std::setfill('0') << m << '-' << std::setw(2) << std::setfill('0') << d;
    table.dates.push_back(date.str());
    if (t > 0) {
      const double f = market_vol * normal(engine);
      for (std::size_t j = 0; j < assets; ++j) {
        price[j] *= std::exp(drift[j] + beta[j] * f + vol[j] * normal(engine));
      }
    }
    for (std::size_t j = 0; j < assets; ++j) table.prices(t, j) = price[j];
    if (++d > days_in(y, m)) {
      d = 1;
      if (++m > 12) {
        m = 1;
        ++y;
      }
    }
  }
  return table;
}

}  // namespace qmcrisk::market
