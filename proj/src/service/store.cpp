#include "qmcrisk/service/store.hpp"

#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "qmcrisk/error.hpp"

namespace qmcrisk::service {
namespace {

bool allowed(std::optional<JobStatus> from, JobStatus to) {
  if (!from) return to == JobStatus::queued;
  switch (*from) {
    case JobStatus::queued: return to == JobStatus::running;
    case JobStatus::running: return to == JobStatus::done || to == JobStatus::failed;
    default: return false;
  }
}

std::string read_text(const std::filesystem::path& p, const std::string& what, const std::string& id) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "unknown " + what + " '" + id + "'", {{what, id}});
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::storage, "cannot write " + p.string());
}

nlohmann::json log_snapshot(const JobRecord& job) {
  auto j = to_json(job);
  j.erase("result");  // lives in reports/<id>.json
  return j;
}

}  // namespace

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
  }
  return "queued";
}

JobStatus parse_job_status(std::string_view name) {
  for (auto s : {JobStatus::queued, JobStatus::running, JobStatus::done, JobStatus::failed}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::validation, "unknown job status '" + std::string(name) + "'");
}

nlohmann::json to_json(const JobRecord& job) {
  nlohmann::json j = {{"id", job.id},
                      {"config", job.config},
                      {"status", std::string(to_string(job.status))},
                      {"created", job.created},
                      {"finished", job.finished}};
  if (job.result) j["result"] = risk::to_json(*job.result);
  if (job.error) j["error"] = *job.error;
  return j;
}

JobRecord job_record_from_json(const nlohmann::json& j) {
  JobRecord job;
  job.id = j.at("id").get<std::string>();
  job.config = j.at("config");
  job.status = parse_job_status(j.at("status").get<std::string>());
  job.created = j.value("created", "");
  job.finished = j.value("finished", "");
  if (j.contains("result")) job.result = risk::risk_report_from_json(j.at("result"));
  if (j.contains("error")) job.error = j.at("error");
  return job;
}

Store::Store(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  load();
}

std::filesystem::path Store::blob(std::string_view kind, const std::string& id, std::string_view ext) const {
  if (id.empty() || id.find_first_of("/\\") != std::string::npos || id.find("..") != std::string::npos) {
    throw Error(ErrorCode::validation, "invalid id '" + id + "'");
  }
  return dir_ / std::string(kind) / (id + std::string(ext));
}

void Store::load() {
  std::ifstream in(dir_ / "jobs.log");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      // A torn final write is tolerated; anything earlier is corruption.
      if (in.peek() == EOF) break;
      throw Error(ErrorCode::storage, "corrupt job log at line " + std::to_string(line_no));
    }
    if (j.contains("deleted")) {
      jobs_.erase(j["deleted"].get<std::string>());
      continue;
    }
    auto job = job_record_from_json(j);
    if (job.status == JobStatus::done) {
      std::ifstream rep(blob("reports", job.id, ".json"));
      if (rep) {
        nlohmann::json r;
        rep >> r;
        job.result = risk::risk_report_from_json(r);
      }
    }
    jobs_[job.id] = std::move(job);
  }
  counter_ = jobs_.size();
}

std::string Store::new_id(std::string_view prefix) {
  static thread_local std::mt19937_64 engine{std::random_device{}()};
  std::lock_guard lock(mutex_);
  std::ostringstream id;
  id << prefix << '-' << std::hex << std::setw(8) << std::setfill('0') << (engine() & 0xffffffffu) << '-'
     << std::dec << std::setw(4) << ++counter_;
  return id.str();
}

void Store::put_job(const JobRecord& job) {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(job.id);
  std::optional<JobStatus> from;
  if (it != jobs_.end()) from = it->second.status;
  if (!allowed(from, job.status)) {
    throw Error(ErrorCode::conflict,
                "illegal job transition " + (from ? std::string(to_string(*from)) : std::string("none")) + " -> " +
                    std::string(to_string(job.status)),
                {{"job", job.id}});
  }
  if (job.result) write_text(blob("reports", job.id, ".json"), risk::to_json(*job.result).dump(2) + "\n");
  std::ofstream log(dir_ / "jobs.log", std::ios::app);
  log << log_snapshot(job).dump() << '\n';
  log.flush();
  if (!log) throw Error(ErrorCode::storage, "cannot append to job log");
  jobs_[job.id] = job;
}

std::optional<JobRecord> Store::job(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::vector<JobRecord> Store::jobs() const {
  std::lock_guard lock(mutex_);
  std::vector<JobRecord> out;
  for (const auto& [id, job] : jobs_) out.push_back(job);
  return out;
}

void Store::delete_job(const std::string& id) {
  std::lock_guard lock(mutex_);
  if (!jobs_.contains(id)) throw Error(ErrorCode::not_found, "unknown job '" + id + "'", {{"job", id}});
  std::ofstream log(dir_ / "jobs.log", std::ios::app);
  log << nlohmann::json{{"deleted", id}}.dump() << '\n';
  jobs_.erase(id);
  std::error_code ec;
  std::filesystem::remove(blob("reports", id, ".json"), ec);
  std::filesystem::remove(blob("returns", id, ".bin"), ec);
}

void Store::put_returns(const std::string& job_id, std::span<const double> returns) {
  const auto p = blob("returns", job_id, ".bin");
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(returns.data()), static_cast<std::streamsize>(returns.size_bytes()));
  if (!out) throw Error(ErrorCode::storage, "cannot write " + p.string());
}

std::vector<double> Store::returns(const std::string& job_id) const {
  const auto p = blob("returns", job_id, ".bin");
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "no simulated returns for job '" + job_id + "'");
  std::vector<double> out(std::filesystem::file_size(p) / sizeof(double));
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size() * sizeof(double)));
  return out;
}

std::string Store::put_prices(const std::string& csv) {
  const auto table = market::parse_prices(csv, "upload");
  (void)table;
  const auto id = new_id("prices");
  write_text(blob("prices", id, ".csv"), csv);
  return id;
}

market::PriceTable Store::prices(const std::string& id) const {
  return market::parse_prices(read_text(blob("prices", id, ".csv"), "prices", id), id);
}

std::string Store::put_portfolio(const market::Portfolio& portfolio) {
  const auto id = new_id("portfolio");
  nlohmann::json j = {{"tickers", portfolio.tickers}, {"weights", portfolio.weights}};
  write_text(blob("portfolios", id, ".json"), j.dump() + "\n");
  return id;
}

market::Portfolio Store::portfolio(const std::string& id) const {
  const auto j = nlohmann::json::parse(read_text(blob("portfolios", id, ".json"), "portfolio", id));
  // Stored weights are already normalized; renormalizing could move them by an ulp.
  return market::Portfolio{j.at("tickers").get<std::vector<std::string>>(),
                           j.at("weights").get<std::vector<double>>()};
}

std::string Store::put_validation(const nlohmann::json& report) {
  const auto id = new_id("validation");
  write_text(blob("validations", id, ".json"), report.dump(2) + "\n");
  return id;
}

nlohmann::json Store::validation(const std::string& id) const {
  return nlohmann::json::parse(read_text(blob("validations", id, ".json"), "validation", id));
}

}  // namespace qmcrisk::service
