#include "qmcrisk/service/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "qmcrisk/error.hpp"
#include "qmcrisk/qsource/records.hpp"
#include "qmcrisk/service/api.hpp"

namespace qmcrisk::service {
namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::storage, "cannot write " + path.string());
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string format_validation(const randtest::ValidationReport& r) {
  std::ostringstream out;
  out << "source_id: " << r.source_id << '\n'
      << "sample_count: " << r.sample_count << '\n'
      << "chi_square:\n"
      << "  statistic: " << fixed(r.chi_square.statistic, 4) << '\n'
      << "  dof: " << r.chi_square.dof << '\n'
      << "  p_value: " << fixed(r.chi_square.p_value, 6) << '\n'
      << "ks:\n"
      << "  statistic: " << fixed(r.ks.statistic, 6) << '\n'
      << "  critical_1pct: " << fixed(r.ks.critical_1pct, 6) << '\n'
      << "autocorrelation:\n";
  for (const auto& c : r.autocorrelation) out << "  - lag: " << c.lag << ", r: " << fixed(c.r, 6) << '\n';
  out << "entropy_bits: " << fixed(r.entropy_bits, 6) << '\n'
      << "verdict:\n"
      << "  chi_square: " << (r.verdict.chi_square ? "pass" : "fail") << '\n'
      << "  ks: " << (r.verdict.ks ? "pass" : "fail") << '\n'
      << "  autocorrelation: " << (r.verdict.autocorrelation ? "pass" : "fail") << '\n'
      << "  entropy: " << (r.verdict.entropy ? "pass" : "fail") << '\n'
      << "  overall: " << (r.verdict.overall ? "pass" : "fail") << '\n';
  return out.str();
}

struct RiskOptions {
  std::string prices;
  std::string portfolio;
  std::string method = "mc";
  double alpha = 0.01;
  std::uint32_t horizon = 1;
  std::uint64_t paths = 0;
  std::string source;
  std::string compounding = "sum";
  std::string return_kind = "log";
  std::string report;
};

void add_risk_options(CLI::App* cmd, RiskOptions& o) {
  cmd->add_option("--prices", o.prices, "Price history CSV")->required();
  cmd->add_option("--portfolio", o.portfolio, "Portfolio file (TICKER,weight lines)")->required();
  cmd->add_option("--method", o.method, "hist or mc")->check(CLI::IsMember({"hist", "mc"}));
  cmd->add_option("--alpha", o.alpha, "Tail probability");
  cmd->add_option("--horizon", o.horizon, "Horizon in trading days");
  cmd->add_option("--paths", o.paths, "Monte Carlo paths");
  cmd->add_option("--source", o.source, "Registered randomness source id");
  cmd->add_option("--compounding", o.compounding, "sum, simple or sqrt-time")
      ->check(CLI::IsMember({"sum", "simple", "sqrt-time"}));
  cmd->add_option("--return-kind", o.return_kind, "log or simple")->check(CLI::IsMember({"log", "simple"}));
  cmd->add_option("--report", o.report, "Write the report as JSON");
}

risk::RiskJobConfig job_config(const RiskOptions& o) {
  JobRequest request;
  request.prices = o.prices;
  request.portfolio = o.portfolio;
  request.method = risk::parse_method(o.method);
  request.alpha = o.alpha;
  request.horizon_days = o.horizon;
  request.paths = o.paths;
  request.source = o.source;
  request.compounding = risk::parse_compounding(o.compounding);
  request.return_kind = market::parse_return_kind(o.return_kind);
  if (request.method == risk::Method::monte_carlo && request.source.empty()) {
    throw Error(ErrorCode::validation, "--source is required for --method mc");
  }
  const auto inputs = calibrate(market::load_prices(o.prices), request.return_kind);
  return make_job_config(request, market::load_portfolio(o.portfolio), inputs);
}

std::filesystem::path absolute_from_cwd(const std::string& p) {
  return std::filesystem::absolute(std::filesystem::path(p)).lexically_normal();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Portfolio VaR/CVaR with pluggable randomness sources"};
  app.require_subcommand(1);
  std::string data_dir = env_or("QMC_DATA_DIR", "qmc-data");
  app.add_option("--data-dir", data_dir, "Registry and job store directory (env QMC_DATA_DIR)");

  auto context = [&] {
    return qsource::SourceContext{env_or("QMC_API_KEY", ""), std::filesystem::path(data_dir)};
  };
  auto registry = [&] { return SourceRegistry(std::filesystem::path(data_dir) / "sources.json", context()); };

  int exit_code = 0;

  // rng
  auto* rng = app.add_subcommand("rng", "Randomness sources");
  rng->require_subcommand(1);

  auto* sources = rng->add_subcommand("sources", "Source registry");
  sources->require_subcommand(1);
  auto* add = sources->add_subcommand("add", "Register a source");
  std::string add_id, add_kind;
  std::vector<std::string> add_params;
  add->add_option("--id", add_id)->required();
  add->add_option("--kind", add_kind, "pseudo, remote-http, measurement-file, pool, mock")->required();
  add->add_option("--param", add_params, "key=value (repeatable)");
  add->callback([&] {
    qsource::RandomSourceDescriptor d;
    d.id = add_id;
    d.kind = qsource::parse_source_kind(add_kind);
    for (const auto& kv : add_params) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::validation, "--param expects key=value, got '" + kv + "'");
      d.params[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (auto p = d.param("path")) d.params["path"] = absolute_from_cwd(*p).string();
    registry().add(d);
    out << "registered " << d.id << " (" << qsource::to_string(d.kind) << ")\n";
  });
  auto* list = sources->add_subcommand("list", "List registered sources");
  list->callback([&] {
    const auto reg = registry();
    for (const auto& d : reg.list()) {
      out << d.id << '\t' << qsource::to_string(d.kind);
      for (const auto& [k, v] : d.params) out << '\t' << k << '=' << v;
      if (auto rep = reg.report_for(d.id)) out << "\tvalidation=" << *rep;
      out << '\n';
    }
  });

  auto* fetch = rng->add_subcommand("fetch", "Fill an entropy pool from a source");
  std::string fetch_source, fetch_out;
  std::uint64_t fetch_words = 0;
  fetch->add_option("--source", fetch_source)->required();
  fetch->add_option("--words", fetch_words, "16-bit words to fetch")->required();
  fetch->add_option("--out", fetch_out, "Pool file to create")->required();
  fetch->callback([&] {
    const auto descriptor = registry().get(fetch_source);
    const auto pool = qsource::create_pool(fetch_out, descriptor, fetch_words * 2, context());
    out << "pool " << pool.path().string() << ": " << pool.total_bytes() << " bytes from " << descriptor.id
        << (pool.metadata().extractor_applied ? " (extracted)" : "") << '\n';
  });

  auto* ingest = rng->add_subcommand("ingest", "Read a measurement-record file");
  std::string ingest_records, ingest_out;
  bool ingest_extract = false;
  ingest->add_option("--records", ingest_records)->required();
  ingest->add_flag("--extract", ingest_extract, "Apply the Von Neumann extractor");
  ingest->add_option("--out", ingest_out, "Write the packed bits to a pool file");
  ingest->callback([&] {
    const auto set = qsource::ingest_measurement_records(ingest_records);
    const auto raw_bits = static_cast<std::uint64_t>(set.records.size()) * set.bits_per_shot;
    const auto bits = qsource::records_to_bits(set, ingest_extract);
    out << "backend " << set.backend_label << ", shots " << set.records.size() << ", bits/shot "
        << set.bits_per_shot << ", raw bits " << raw_bits << ", output bits " << bits.size() << '\n';
    if (!ingest_out.empty()) {
      const std::size_t whole = bits.size() / 8 * 8;
      const auto packed = rand::pack_bits(std::span(bits.bits).first(whole));
      rand::PoolMetadata meta{"records:" + set.backend_label, rand::utc_timestamp_now(), ingest_extract, {}};
      const auto pool = rand::EntropyPool::create(ingest_out, packed, meta);
      out << "pool " << pool.path().string() << ": " << pool.total_bytes() << " bytes\n";
    }
  });

  auto* validate = rng->add_subcommand("validate", "Run the randomness battery");
  std::string validate_source, validate_report;
  std::uint64_t validate_samples = 0;
  randtest::BatteryConfig battery;
  validate->add_option("--source", validate_source)->required();
  validate->add_option("--samples", validate_samples)->required();
  validate->add_option("--report", validate_report, "Write the report as JSON");
  validate->add_option("--chi-square-bins", battery.chi_square_bins);
  validate->add_option("--max-lag", battery.max_lag);
  validate->add_option("--entropy-bins", battery.entropy_bins);
  validate->callback([&] {
    RiskService service({data_dir, env_or("QMC_API_KEY", ""), 1});
    std::string report_id;
    const auto report = service.validate_source(validate_source, validate_samples, battery, &report_id);
    out << format_validation(report) << "report_id: " << report_id << '\n';
    if (!validate_report.empty()) write_file(validate_report, randtest::to_json(report).dump(2) + "\n");
    if (!report.verdict.overall) exit_code = 2;
  });

  // risk
  auto* risk_cmd = app.add_subcommand("risk", "Risk estimation");
  risk_cmd->require_subcommand(1);
  auto* run = risk_cmd->add_subcommand("run", "Estimate VaR and CVaR");
  RiskOptions run_opts;
  add_risk_options(run, run_opts);
  run->callback([&] {
    const auto config = job_config(run_opts);
    std::shared_ptr<qsource::RandomSource> source;
    auto reg = registry();
    if (config.method == risk::Method::monte_carlo) source = reg.open(config.source_id);
    const auto result = risk::run_risk_job(config, source.get());
    out << risk::format_report(result.report);
    if (!run_opts.report.empty()) write_file(run_opts.report, risk::to_json(result.report).dump(2) + "\n");
  });

  auto* study_cmd = app.add_subcommand("study", "Precision study");
  study_cmd->require_subcommand(1);
  auto* study = study_cmd->add_subcommand("run", "Repeat a Monte Carlo estimate K times");
  RiskOptions study_opts;
  std::uint32_t study_runs = 5;
  add_risk_options(study, study_opts);
  study->add_option("--runs", study_runs, "Number of independent runs");
  study->callback([&] {
    const auto config = job_config(study_opts);
    if (config.method != risk::Method::monte_carlo) {
      throw Error(ErrorCode::validation, "a precision study needs --method mc");
    }
    auto reg = registry();
    auto source = reg.open(config.source_id);
    const auto report = risk::precision_study(config, study_runs, *source);
    out << risk::format_report(report, config);
    if (!study_opts.report.empty()) write_file(study_opts.report, risk::to_json(report).dump(2) + "\n");
  });

  // data
  auto* data = app.add_subcommand("data", "Sample data");
  data->require_subcommand(1);
  auto* synth = data->add_subcommand("synth", "Synthetic price history and random-weight portfolio");
  std::size_t synth_assets = 40, synth_days = 750;
  std::uint64_t synth_seed = 1, synth_weight_seed = 2;
  std::string synth_out, synth_portfolio;
  synth->add_option("--assets", synth_assets);
  synth->add_option("--days", synth_days);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--weight-seed", synth_weight_seed);
  synth->add_option("--out", synth_out, "Price CSV to write")->required();
  synth->add_option("--portfolio-out", synth_portfolio, "Portfolio file to write");
  synth->callback([&] {
    const auto table = market::synthesize_prices(synth_assets, synth_days, synth_seed);
    write_file(synth_out, market::format_prices(table));
    out << "prices " << synth_out << ": " << table.tickers.size() << " assets, " << table.dates.size() << " days\n";
    if (!synth_portfolio.empty()) {
      write_file(synth_portfolio, market::format_portfolio(market::Portfolio::random(table.tickers, synth_weight_seed)));
      out << "portfolio " << synth_portfolio << '\n';
    }
  });

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  std::string listen = env_or("QMC_LISTEN", "127.0.0.1:8080");
  std::size_t workers = std::stoul(env_or("QMC_WORKERS", "1"));
  serve->add_option("--listen", listen, "host:port (env QMC_LISTEN)");
  serve->add_option("--workers", workers, "Job worker threads (env QMC_WORKERS)");
  serve->callback([&] {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::validation, "--listen expects host:port");
    const std::string host = listen.substr(0, colon);
    const int port = std::stoi(listen.substr(colon + 1));
    RiskService service({data_dir, env_or("QMC_API_KEY", ""), workers});
    ApiServer server(service);
    const int bound = server.bind(host, port);
    out << "listening on " << host << ':' << bound << ", data in " << data_dir << std::endl;
    g_stop = false;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::thread watcher([&] {
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
    });
    server.run();
    g_stop = true;
    watcher.join();
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    for (const auto& [k, v] : e.detail()) err << "  " << k << ": " << v << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return exit_code;
}

}  // namespace qmcrisk::service
