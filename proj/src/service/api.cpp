#include "qmcrisk/service/api.hpp"

#include <httplib.h>

namespace qmcrisk::service {
namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::validation, std::string("request body is not valid JSON: ") + e.what());
  }
}

bool is_text(const httplib::Request& req) {
  const auto type = req.get_header_value("Content-Type");
  return type.rfind("text/", 0) == 0;
}

json source_json(const SourceRegistry& registry, const qsource::RandomSourceDescriptor& d) {
  json j = d;
  const auto report = registry.report_for(d.id);
  j["validation_report"] = report ? json(*report) : json(nullptr);
  return j;
}

JobRecord require_job(const Store& store, const std::string& id) {
  auto job = store.job(id);
  if (!job) throw Error(ErrorCode::not_found, "unknown job '" + id + "'", {{"job", id}});
  return *job;
}

JobRecord require_done(const Store& store, const std::string& id) {
  auto job = require_job(store, id);
  if (job.status != JobStatus::done) {
    throw Error(ErrorCode::conflict, "job '" + id + "' is " + std::string(to_string(job.status)),
                {{"job", id}, {"status", std::string(to_string(job.status))}});
  }
  return job;
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::insufficient_entropy:
    case ErrorCode::pool_exhausted:
    case ErrorCode::partial_fill:
    case ErrorCode::entropy_exhausted:
    case ErrorCode::partial_study: return 422;
    case ErrorCode::network:
    case ErrorCode::provider:
    case ErrorCode::malformed_response: return 502;
    case ErrorCode::storage: return 500;
    default: return 400;
  }
}

json error_body(const Error& error) {
  return {{"code", std::string(to_string(error.code()))}, {"message", error.what()}, {"detail", error.detail()}};
}

ApiServer::ApiServer(RiskService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port = server_->bind_to_any_port(host);
    if (port < 0) throw Error(ErrorCode::network, "cannot bind " + host);
    return port;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::network, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void ApiServer::run() { server_->listen_after_bind(); }

void ApiServer::stop() {
  if (server_) server_->stop();
}

void ApiServer::routes() {
  auto& s = *server_;

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_json(res, http_status(e.code()), error_body(e));
    } catch (const std::exception& e) {
      send_json(res, 500, {{"code", "internal"}, {"message", e.what()}, {"detail", json::object()}});
    }
  });

  s.Post("/sources", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    qsource::RandomSourceDescriptor d;
    try {
      d = body.get<qsource::RandomSourceDescriptor>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::validation, std::string("bad source descriptor: ") + e.what());
    }
    service_.sources().add(d);
    send_json(res, 201, source_json(service_.sources(), d));
  });

  s.Get("/sources", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& d : service_.sources().list()) out.push_back(source_json(service_.sources(), d));
    send_json(res, 200, out);
  });

  s.Post(R"(/sources/([^/]+)/validate)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    if (!body.contains("samples") || !body["samples"].is_number_unsigned()) {
      throw Error(ErrorCode::validation, "validate needs a non-negative integer 'samples'");
    }
    const auto battery = battery_config_from_json(body.value("battery", json::object()));
    std::string report_id;
    const auto report =
        service_.validate_source(req.matches[1], body["samples"].get<std::uint64_t>(), battery, &report_id);
    auto out = randtest::to_json(report);
    out["report_id"] = report_id;
    send_json(res, 200, out);
  });

  s.Post("/prices", [this](const httplib::Request& req, httplib::Response& res) {
    const auto id = service_.store().put_prices(req.body);
    const auto table = service_.store().prices(id);
    send_json(res, 201,
              {{"id", id},
               {"tickers", table.tickers},
               {"rows", table.dates.size()},
               {"dropped_rows", table.dropped_rows}});
  });

  s.Post("/portfolios", [this](const httplib::Request& req, httplib::Response& res) {
    market::Portfolio portfolio;
    if (is_text(req)) {
      portfolio = market::parse_portfolio(req.body);
    } else {
      const auto body = parse_body(req);
      try {
        portfolio = market::Portfolio::make(body.at("tickers").get<std::vector<std::string>>(),
                                            body.at("weights").get<std::vector<double>>());
      } catch (const json::exception& e) {
        throw Error(ErrorCode::validation, std::string("portfolio needs 'tickers' and 'weights': ") + e.what());
      }
    }
    const auto id = service_.store().put_portfolio(portfolio);
    send_json(res, 201, {{"id", id}, {"tickers", portfolio.tickers}, {"weights", portfolio.weights}});
  });

  s.Post("/jobs", [this](const httplib::Request& req, httplib::Response& res) {
    const auto job = service_.submit(parse_body(req));
    send_json(res, 202, to_json(job));
  });

  s.Get("/jobs", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& job : service_.store().jobs()) out.push_back(to_json(job));
    send_json(res, 200, out);
  });

  s.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, to_json(require_job(service_.store(), req.matches[1])));
  });

  s.Get(R"(/jobs/([^/]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto job = require_done(service_.store(), req.matches[1]);
    send_json(res, 200, risk::to_json(*job.result));
  });

  s.Get(R"(/jobs/([^/]+)/histogram)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto job = require_done(service_.store(), req.matches[1]);
    std::uint32_t bins = 50;
    if (req.has_param("bins")) {
      try {
        const long value = std::stol(req.get_param_value("bins"));
        if (value < 1 || value > 100000) throw std::out_of_range("bins");
        bins = static_cast<std::uint32_t>(value);
      } catch (const std::exception&) {
        throw Error(ErrorCode::validation, "bins must be an integer in [1, 100000]");
      }
    }
    const auto returns = service_.store().returns(job.id);
    const auto h = risk::make_histogram(returns, bins);
    send_json(res, 200, {{"job", job.id}, {"bins", bins}, {"edges", h.edges}, {"counts", h.counts}});
  });

  s.Delete(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto job = require_job(service_.store(), id);
    if (job.status == JobStatus::queued || job.status == JobStatus::running) {
      throw Error(ErrorCode::conflict, "job '" + id + "' is still " + std::string(to_string(job.status)),
                  {{"job", id}});
    }
    service_.store().delete_job(id);
    res.status = 204;
  });
}

}  // namespace qmcrisk::service
