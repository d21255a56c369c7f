#pragma once

// CSV persistence for matrices, training traces and recovery tables, and a
// JSON snapshot of the full training state for exact resume.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "arflow/eval.hpp"
#include "arflow/matrix.hpp"
#include "arflow/trainer.hpp"

namespace arflow::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};

void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const Matrix& values);
CsvTable read_matrix_csv(const std::filesystem::path& path);

/// Default column names: prefix1, prefix2, ...
std::vector<std::string> numbered(const std::string& prefix, std::size_t count);

std::vector<std::string> trace_header(std::size_t n);
void write_trace_row(std::ostream& os, const TraceRow& row);

void write_recovery_csv(const std::filesystem::path& path, const CiReport& report);

nlohmann::json snapshot_to_json(const TrainState& state, const TrainConfig& cfg);
TrainState snapshot_from_json(const nlohmann::json& j);
void write_snapshot(const std::filesystem::path& path, const TrainState& state,
                    const TrainConfig& cfg);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace arflow::io
