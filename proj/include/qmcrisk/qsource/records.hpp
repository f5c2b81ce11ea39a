#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qmcrisk/rand/bits.hpp"

namespace qmcrisk::qsource {

/// Measured bitstrings from repeated shots of a Hadamard-register circuit.
struct MeasurementRecordSet {
  std::uint64_t shots = 0;
  std::uint32_t bits_per_shot = 0;
  std::vector<std::string> records;
  std::string backend_label;
};

/// Parses a record file:
///
///   #shots=<n> bits=<k> backend=<label>
///   0110...
///
/// One k-character 0/1 string per line. Without a header, k is taken from the
/// first record and the backend is "unknown". Errors name the record index and
/// the file line: ErrorCode::format for bad lines or a shot-count mismatch,
/// ErrorCode::empty_input for a file with no shots.
MeasurementRecordSet ingest_measurement_records(const std::filesystem::path& path);
MeasurementRecordSet parse_measurement_records(const std::string& text, const std::string& origin);

/// Concatenates records in shot order, optionally through the Von Neumann extractor.
rand::BitBuffer records_to_bits(const MeasurementRecordSet& records, bool apply_extractor);

}  // namespace qmcrisk::qsource
