#include "qmcrisk/qsource/records.hpp"

#include <fstream>
#include <regex>
#include <sstream>

#include "qmcrisk/error.hpp"

namespace qmcrisk::qsource {
namespace {

Error bad_line(std::size_t record, std::size_t line, const std::string& why) {
  return Error(ErrorCode::format,
               "format error at record " + std::to_string(record) + " (file line " +
                   std::to_string(line) + "): " + why,
               {{"record", std::to_string(record)}, {"line", std::to_string(line)}});
}

}  // namespace

MeasurementRecordSet parse_measurement_records(const std::string& text, const std::string& origin) {
  static const std::regex header_re(R"(^#\s*shots=(\d+)\s+bits=(\d+)\s+backend=(\S+)\s*$)");
  MeasurementRecordSet set;
  bool have_header = false;
  std::uint64_t declared_shots = 0;

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::smatch m;
      if (line_no == 1 && std::regex_match(line, m, header_re)) {
        have_header = true;
        declared_shots = std::stoull(m[1]);
        set.bits_per_shot = static_cast<std::uint32_t>(std::stoul(m[2]));
        set.backend_label = m[3];
        continue;
      }
      if (line_no == 1) throw Error(ErrorCode::format, "malformed record header in " + origin);
      continue;
    }
    const std::size_t record_no = set.records.size() + 1;
    if (set.bits_per_shot == 0) {
      if (have_header) throw bad_line(record_no, line_no, "header declares zero bits per shot");
      set.bits_per_shot = static_cast<std::uint32_t>(line.size());
    }
    if (line.size() != set.bits_per_shot) {
      throw bad_line(record_no, line_no,
                     "expected " + std::to_string(set.bits_per_shot) + " bits, got " +
                         std::to_string(line.size()) + " characters");
    }
    if (line.find_first_not_of("01") != std::string::npos) {
      throw bad_line(record_no, line_no, "record must contain only 0 and 1");
    }
    set.records.push_back(line);
  }

  if (set.records.empty()) {
    throw Error(ErrorCode::empty_input, "no measurement records in " + origin);
  }
  if (have_header && declared_shots != set.records.size()) {
    throw Error(ErrorCode::format,
                "header declares " + std::to_string(declared_shots) + " shots, file holds " +
                    std::to_string(set.records.size()),
                {{"declared", std::to_string(declared_shots)},
                 {"found", std::to_string(set.records.size())}});
  }
  if (!have_header) set.backend_label = "unknown";
  set.shots = set.records.size();
  return set;
}

MeasurementRecordSet ingest_measurement_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "cannot open record file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_measurement_records(buf.str(), path.string());
}

rand::BitBuffer records_to_bits(const MeasurementRecordSet& records, bool apply_extractor) {
  rand::BitBuffer bits;
  bits.origin = records.backend_label.empty() ? "records" : records.backend_label;
  bits.bits.reserve(records.records.size() * records.bits_per_shot);
  for (const auto& r : records.records) {
    for (char ch : r) bits.bits.push_back(ch == '1' ? 1 : 0);
  }
  return apply_extractor ? rand::von_neumann_extract(bits) : bits;
}

}  // namespace qmcrisk::qsource
