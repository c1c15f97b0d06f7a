#pragma once

// Configuration-driven experiment runner: INI configs in, JSON results with
// CSV companions out, plus the report, catalog and selftest commands.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace hitlab {

inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::ordered_json;

/// One experiment. `params` holds the keys of the section named after the
/// kind, e.g. [hitting]; the [experiment] section supplies the rest.
struct ExperimentConfig {
  std::string kind;
  std::string system;
  std::uint64_t seed = 0;
  int precision_bits = 512;
  std::string output;  // may be empty; the CLI then requires --out
  std::map<std::string, std::string> params;
};

const std::vector<std::string>& experiment_kinds();

/// Parses INI text. Throws ConfigInvalid with a field path such as
/// "experiment.seed" for missing or malformed entries.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct CsvTable {
  std::string name;  // file suffix: <stem>.<name>.csv
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Sections: schema_version, kind, config (echo), engine, data, summary,
/// runtime. Everything except runtime is a pure function of (config, build).
struct ExperimentResult {
  Json document;
  std::vector<CsvTable> tables;
};

struct RunOptions {
  unsigned workers = 0;
};

/// Validates the whole config before any computation, then dispatches on the
/// kind. Estimator failures propagate as hitlab::Error.
ExperimentResult run(const ExperimentConfig& config, const RunOptions& options = {});

/// Writes <path> and its CSV companions, each through a temporary file and
/// rename, so an interrupted run leaves no partial file at the final path.
void write_result(const ExperimentResult& result, const std::filesystem::path& path);
void write_atomic(const std::filesystem::path& path, std::string_view contents);

std::string to_csv(const CsvTable& table);
/// 17 significant digits.
std::string csv_number(double v);

/// JSON record for a failure: {"error": code, "where": field, "message": ...}.
Json error_record(const std::exception& e);

struct Report {
  std::string text;
  std::vector<CsvTable> tables;
};

/// Summary over persisted results. Inequality flags use only the stored
/// summary fits. Throws SchemaMismatch on empty input or version mismatch.
Report report(const std::vector<Json>& results);
Json load_result(const std::filesystem::path& path);

std::string catalog_listing();

struct SelfTestCase {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<SelfTestCase> selftest();

}  // namespace hitlab
