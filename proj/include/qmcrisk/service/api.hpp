#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "qmcrisk/error.hpp"
#include "qmcrisk/service/jobs.hpp"

namespace httplib {
class Server;
}

namespace qmcrisk::service {

/// HTTP status for an engine error code.
int http_status(ErrorCode code);

/// {code, message, detail} body for an error.
nlohmann::json error_body(const Error& error);

/// JSON-over-HTTP front end for a RiskService.
///
///   POST /sources                 register a descriptor
///   GET  /sources                 list descriptors with linked validation reports
///   POST /sources/{id}/validate   {"samples": n, "battery": {...}}
///   POST /prices                  CSV body
///   POST /portfolios              {"tickers": [...], "weights": [...]}
///   POST /jobs                    job request
///   GET  /jobs, /jobs/{id}, /jobs/{id}/report, /jobs/{id}/histogram?bins=k
///   DELETE /jobs/{id}
class ApiServer {
 public:
  explicit ApiServer(RiskService& service);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds to host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();

 private:
  void routes();

  RiskService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace qmcrisk::service
