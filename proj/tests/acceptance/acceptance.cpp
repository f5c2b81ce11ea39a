// One pass/fail line per acceptance criterion: `qmcrisk_acceptance N`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qmcrisk/market/market.hpp"
#include "qmcrisk/qsource/bit_sources.hpp"
#include "qmcrisk/qsource/variates.hpp"
#include "qmcrisk/rand/bits.hpp"
#include "qmcrisk/rand/normal.hpp"
#include "qmcrisk/rand/pool.hpp"
#include "qmcrisk/randtest/battery.hpp"
#include "qmcrisk/risk/engine.hpp"
#include "qmcrisk/risk/estimators.hpp"
#include "qmcrisk/service/api.hpp"
#include "qmcrisk/service/jobs.hpp"

#include <httplib.h>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qmcrisk;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes << (ok ? "" : "FAILED ") << what << "; ";
  }
};

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("qmcrisk-acceptance-" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::shared_ptr<market::Moments> unit_normal_asset() {
  auto m = std::make_shared<market::Moments>();
  m->tickers = {"X"};
  m->mean = market::Vector::Zero(1);
  m->covariance = market::Matrix::Identity(1, 1);
  m->chol = market::cholesky(m->covariance);
  return m;
}

risk::RiskJobConfig mc_config(std::shared_ptr<const market::Moments> moments, market::Portfolio portfolio,
                              double alpha, std::uint32_t horizon, std::uint64_t paths, std::string source_id) {
  risk::RiskJobConfig c;
  c.portfolio = std::move(portfolio);
  c.method = risk::Method::monte_carlo;
  c.alpha = alpha;
  c.horizon_days = horizon;
  c.paths = paths;
  c.source_id = std::move(source_id);
  c.calibration = std::move(moments);
  return c;
}

// Reference normal CDF in long double: erf Taylor series near the centre,
// erfc continued fraction in the tails.
long double normal_cdf(long double x) {
  const long double z = std::fabs(x) / std::sqrt(2.0L);
  long double tail;
  if (z < 3.0L) {
    long double term = z, sum = z;
    for (int n = 1; n < 200; ++n) {
      term *= -z * z / n;
      sum += term / (2 * n + 1);
    }
    tail = 0.5L - sum / std::sqrt(3.14159265358979323846264338327950288L);
  } else {
    long double f = 0.0L;
    for (int n = 200; n >= 1; --n) f = (n / 2.0L) / (z + f);
    tail = std::exp(-z * z) / (z + f) / std::sqrt(3.14159265358979323846264338327950288L) / 2.0L;
  }
  return x < 0 ? tail : 1.0L - tail;
}

Outcome criterion_1() {
  Outcome o;
  const auto start = Clock::now();
  qsource::PseudoSource source("pseudo", 20240501);
  const auto run = risk::run_risk_job(
      mc_config(unit_normal_asset(), market::Portfolio::make({"X"}, {1.0}), 0.05, 1, 200000, "pseudo"), &source);
  const double elapsed = seconds_since(start);
  o.check(std::abs(run.report.var - 1.6449) <= 0.02, "var " + fmt(run.report.var) + " vs 1.6449 +- 0.02");
  o.check(std::abs(run.report.cvar - 2.0627) <= 0.03, "cvar " + fmt(run.report.cvar) + " vs 2.0627 +- 0.03");
  o.check(elapsed < 5.0, "runtime " + fmt(elapsed, 3) + " s < 5 s");
  return o;
}

Outcome criterion_2() {
  Outcome o;
  const auto portfolio = market::Portfolio::make({"X"}, {1.0});
  qsource::PseudoSource a("pseudo", 9001);
  const auto small = risk::precision_study(mc_config(unit_normal_asset(), portfolio, 0.05, 1, 10000, "pseudo"), 20, a);
  qsource::PseudoSource b("pseudo", 9002);
  const auto large = risk::precision_study(mc_config(unit_normal_asset(), portfolio, 0.05, 1, 40000, "pseudo"), 20, b);
  const double ratio = large.std_var / small.std_var;
  o.check(std::abs(small.std_var - 0.0211) <= 0.4 * 0.0211, "std_var(N=1e4) " + fmt(small.std_var) + " vs 0.0211 +- 40%");
  o.check(std::abs(ratio - 0.5) <= 0.3 * 0.5, "std_var(4N)/std_var(N) " + fmt(ratio) + " vs 0.5 +- 30%");
  return o;
}

Outcome criterion_3() {
  Outcome o;
  const std::vector<double> alphas = {0.05, 0.1, 0.125, 0.2, 0.25, 0.3, 1.0 / 3, 0.5, 0.75, 0.9};
  const std::vector<double> grid = {-0.5, -0.125, 0.0, 0.25};
  std::uint64_t vectors = 0, comparisons = 0, mismatches = 0, guard_misses = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    std::vector<std::size_t> idx(n, 0);
    std::vector<double> x(n);
    for (;;) {
      for (std::size_t i = 0; i < n; ++i) x[i] = grid[idx[i]];
      ++vectors;
      for (double a : alphas) {
        const auto k = risk::tail_count(n, a);
        if (k == 0) {
          try {
            risk::sorted_quantile_var(x, a);
            ++guard_misses;
          } catch (const Error& e) {
            if (e.code() != ErrorCode::insufficient_paths) ++guard_misses;
          }
          continue;
        }
        // Over all k-subsets S: the k-th smallest is min max(S), the tail sum is min sum(S).
        double best_max = INFINITY, best_sum = INFINITY;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
          if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
          double mx = -INFINITY, sum = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
              mx = std::max(mx, x[i]);
              sum += x[i];
            }
          }
          best_max = std::min(best_max, mx);
          best_sum = std::min(best_sum, sum);
        }
        ++comparisons;
        if (risk::sorted_quantile_var(x, a) != -best_max) ++mismatches;
        if (risk::tail_mean_cvar(x, a) != -(best_sum / static_cast<double>(k))) ++mismatches;
      }
      std::size_t pos = 0;
      while (pos < n && ++idx[pos] == grid.size()) idx[pos++] = 0;
      if (pos == n) break;
    }
  }
  o.check(mismatches == 0, std::to_string(vectors) + " vectors, " + std::to_string(comparisons) +
                               " (vector, alpha) pairs, " + std::to_string(mismatches) + " mismatches");
  o.check(guard_misses == 0, std::to_string(guard_misses) + " empty tails not rejected");
  return o;
}

Outcome criterion_4() {
  Outcome o;
  qsource::MockBitSource raw_source(4242, 0.6);
  const auto raw = rand::bits_to_uniform(raw_source.take(53 * 20000)).values;
  const auto raw_report = randtest::run_battery(raw, {}, "mock-0.6");
  o.check(raw_report.chi_square.p_value < 0.01, "raw chi-square p " + fmt(raw_report.chi_square.p_value) + " < 0.01");

  qsource::MockBitSource source(4243, 0.6);
  const std::size_t input_bits = 1'700'000;
  const auto extracted = rand::von_neumann_extract(source.take(input_bits));
  // Expected output is p(1-p) bits per input bit, i.e. 2p(1-p) per input pair.
  const double yield = static_cast<double>(extracted.size()) / input_bits;
  o.check(extracted.size() >= 100'000, std::to_string(extracted.size()) + " extracted bits >= 1e5");
  o.check(std::abs(yield - 0.24) <= 0.05 * 0.24, "yield " + fmt(yield) + " per input bit (" + fmt(2 * yield) + " per pair) vs p(1-p) = 0.24 +- 5%");
  const auto u = rand::bits_to_uniform(extracted).values;
  const auto report = randtest::run_battery(u, {}, "mock-0.6-extracted");
  o.check(report.verdict.overall, "extracted battery on " + std::to_string(u.size()) + " samples: chi-square p " +
                                      fmt(report.chi_square.p_value) + ", KS D " + fmt(report.ks.statistic) +
                                      ", entropy " + fmt(report.entropy_bits) + " bits");
  return o;
}

Outcome criterion_5() {
  Outcome o;
  qsource::PseudoSource source("pseudo", 5150);
  const auto u = qsource::draw_uniforms(source, 1'000'000);
  const auto report = randtest::run_battery(u, {}, "pseudo");
  o.check(report.ks.statistic < 0.00163, "KS D " + fmt(report.ks.statistic) + " < 0.00163");
  double worst = 0.0;
  for (const auto& c : report.autocorrelation) worst = std::max(worst, std::abs(c.r));
  o.check(report.autocorrelation.size() == 10 && worst < 0.0095, "max |r(k)|, k <= 10: " + fmt(worst) + " < 0.0095");
  o.check(report.chi_square.p_value >= 0.01, "chi-square p " + fmt(report.chi_square.p_value) + " >= 0.01");
  return o;
}

Outcome criterion_6() {
  Outcome o;
  TempDir dir;
  const std::uint32_t assets = 40, horizon = 2;
  const std::uint64_t paths = 2'000'000;
  const double alpha = 0.01;

  const auto prices = market::synthesize_prices(assets, 750, 1);
  const auto portfolio = market::Portfolio::random(prices.tickers, 2);
  const auto inputs = service::calibrate(prices, market::ReturnKind::log);

  const std::uint64_t variates = paths * assets * horizon;
  auto fill_start = Clock::now();
  qsource::MockBitSource mock(77, 0.5, "mock-fair");
  rand::EntropyPool::create(dir / "big.qpool", mock, rand::bytes_for_uniforms(variates),
                            {"mock-fair", "2024-01-01T00:00:00Z", false, {}});
  const double fill_seconds = seconds_since(fill_start);

  const auto start = Clock::now();
  qsource::PseudoSource pseudo("pseudo", 20240601);
  const auto a = risk::run_risk_job(mc_config(inputs.moments, portfolio, alpha, horizon, paths, "pseudo"), &pseudo);
  auto pool = qsource::make_source({"pool", qsource::SourceKind::pool, {{"path", (dir / "big.qpool").string()}}});
  const auto b = risk::run_risk_job(mc_config(inputs.moments, portfolio, alpha, horizon, paths, "pool"), pool.get());

  // Standard error by the repeated-run machinery at a smaller N, scaled by 1/sqrt(N).
  const std::uint64_t study_paths = 20000;
  qsource::PseudoSource study_source("pseudo", 31337);
  const auto study =
      risk::precision_study(mc_config(inputs.moments, portfolio, alpha, horizon, study_paths, "pseudo"), 20, study_source);
  const double se = study.std_var * std::sqrt(static_cast<double>(study_paths) / paths);
  const double combined = std::sqrt(2.0) * se;
  const double elapsed = seconds_since(start);

  const double diff = std::abs(a.report.var - b.report.var);
  o.check(a.returns.size() == paths && b.returns.size() == paths, "both runs complete");
  o.check(diff <= 3 * combined, "VaR pseudo " + fmt(a.report.var) + " vs pool " + fmt(b.report.var) + ": |diff| " +
                                    fmt(diff, 3) + " <= 3 x combined SE " + fmt(combined, 3));
  o.check(elapsed < 60.0, "runs + SE study " + fmt(elapsed, 3) + " s < 60 s (pool fill " + fmt(fill_seconds, 3) + " s)");
  return o;
}

json strip_elapsed(json report) {
  report.erase("elapsed_seconds");
  report.erase("elapsed");
  return report;
}

int run_cli(const std::vector<std::string>& args) {
  std::string cmd = QMCRISK_CLI;
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " > /dev/null";
  return std::system(cmd.c_str());
}

Outcome criterion_7() {
  Outcome o;
  TempDir dir;
  const auto prices_path = dir / "prices.csv";
  const auto portfolio_path = dir / "portfolio.txt";
  const auto table = market::synthesize_prices(5, 300, 3);
  const auto portfolio = market::Portfolio::random(table.tickers, 4);
  std::ofstream(prices_path) << market::format_prices(table);
  std::ofstream(portfolio_path) << market::format_portfolio(portfolio);

  const std::uint64_t paths = 20000;
  const std::uint32_t horizon = 2;
  const auto pool_bytes = rand::bytes_for_uniforms(paths * 5 * horizon);
  qsource::MockBitSource mock(99, 0.5);
  const auto payload = qsource::drain(mock, pool_bytes);
  rand::EntropyPool::create(dir / "cli.qpool", payload, {"mock", "2024-01-01T00:00:00Z", false, {}});
  rand::EntropyPool::create(dir / "api.qpool", payload, {"mock", "2024-01-01T00:00:00Z", false, {}});

  // CLI side
  const auto cli_data = (dir / "cli-data").string();
  int rc = run_cli({"--data-dir", cli_data, "rng", "sources", "add", "--id", "ps", "--kind", "pseudo", "--param", "seed=5"});
  rc |= run_cli({"--data-dir", cli_data, "rng", "sources", "add", "--id", "pool", "--kind", "pool", "--param",
                 "path=" + (dir / "cli.qpool").string()});
  std::vector<json> cli_reports;
  for (const std::string source : {"ps", "pool"}) {
    const auto out = (dir / ("cli-" + source + ".json")).string();
    rc |= run_cli({"--data-dir", cli_data, "risk", "run", "--prices", prices_path.string(), "--portfolio",
                   portfolio_path.string(), "--method", "mc", "--alpha", "0.01", "--horizon", std::to_string(horizon),
                   "--paths", std::to_string(paths), "--source", source, "--report", out});
    std::ifstream in(out);
    cli_reports.push_back(in ? json::parse(in) : json());
  }
  o.check(rc == 0, "CLI runs exit 0");

  // HTTP side
  service::RiskService svc({dir / "api-data", "", 1});
  service::ApiServer api(svc);
  const int port = api.bind("127.0.0.1", 0);
  std::thread server([&] { api.run(); });
  httplib::Client client("127.0.0.1", port);
  auto post = [&](const std::string& path, const std::string& body, const std::string& type) {
    auto r = client.Post(path, body, type);
    return r ? json::parse(r->body.empty() ? "{}" : r->body) : json();
  };
  post("/sources", json{{"id", "ps"}, {"kind", "pseudo"}, {"params", {{"seed", "5"}}}}.dump(), "application/json");
  post("/sources", json{{"id", "pool"}, {"kind", "pool"}, {"params", {{"path", (dir / "api.qpool").string()}}}}.dump(),
       "application/json");
  std::ostringstream csv;
  csv << std::ifstream(prices_path).rdbuf();
  const auto prices_id = post("/prices", csv.str(), "text/csv").value("id", "");
  std::ostringstream weights;
  weights << std::ifstream(portfolio_path).rdbuf();
  const auto portfolio_id = post("/portfolios", weights.str(), "text/plain").value("id", "");

  std::vector<json> api_reports;
  for (const std::string source : {"ps", "pool"}) {
    const auto job = post("/jobs",
                          json{{"prices", prices_id}, {"portfolio", portfolio_id}, {"method", "mc"}, {"alpha", 0.01},
                               {"horizon", horizon}, {"paths", paths}, {"source", source}}
                              .dump(),
                          "application/json");
    const auto id = job.value("id", "");
    json report;
    for (int i = 0; i < 6000 && id.size(); ++i) {
      auto r = client.Get("/jobs/" + id + "/report");
      if (r && r->status == 200) {
        report = json::parse(r->body);
        break;
      }
      auto status = client.Get("/jobs/" + id);
      if (status && json::parse(status->body).value("status", "") == "failed") break;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    api_reports.push_back(report);
  }
  api.stop();
  server.join();

  for (std::size_t i = 0; i < 2; ++i) {
    const std::string label = i == 0 ? "pseudo" : "pool";
    const bool ok = !cli_reports[i].is_null() && !api_reports[i].is_null() &&
                    strip_elapsed(cli_reports[i]) == strip_elapsed(api_reports[i]) &&
                    cli_reports[i].at("var").get<double>() == api_reports[i].at("var").get<double>() &&
                    cli_reports[i].at("cvar").get<double>() == api_reports[i].at("cvar").get<double>();
    o.check(ok, label + " CLI " + strip_elapsed(cli_reports[i]).dump() + " == API " + strip_elapsed(api_reports[i]).dump());
  }
  return o;
}

Outcome criterion_8() {
  Outcome o;
  const int n = 10000;
  long double worst = 0.0L;
  double worst_u = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double u = static_cast<double>(i) / (n + 1);
    const long double err = std::fabs(normal_cdf(rand::inverse_normal_cdf(u)) - u);
    if (err > worst) {
      worst = err;
      worst_u = u;
    }
  }
  o.check(worst <= 1e-9L, "max |Phi(Phi^-1(u)) - u| over " + std::to_string(n) + " points " +
                              fmt(static_cast<double>(worst), 3) + " at u=" + fmt(worst_u) + " <= 1e-9");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {criterion_1, criterion_2, criterion_3, criterion_4,
                                                          criterion_5, criterion_6, criterion_7, criterion_8};
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty()) {
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) selected.push_back(i);
  }
  bool all = true;
  for (int id : selected) {
    if (id < 1 || id > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion " << id << '\n';
      return 2;
    }
    Outcome o;
    const auto start = Clock::now();
    try {
      o = criteria[id - 1]();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " (" << fmt(seconds_since(start), 3)
              << " s) " << o.notes.str() << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
