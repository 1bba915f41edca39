#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace curator {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ServiceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitService = 4;

inline constexpr const char* kToolkitVersion = "0.1.0";

struct StageRecord {
  std::string name;
  std::map<std::string, std::size_t> counts;
  double wall_seconds = 0.0;
};

struct RunManifest {
  std::string version = kToolkitVersion;
  nlohmann::json config;                        // resolved snapshot
  std::map<std::string, std::string> digests;   // input path -> content hash
  std::uint64_t seed = 0;
  std::vector<StageRecord> stages;

  nlohmann::json to_json() const;
};

// Hex fingerprint of a file's bytes.
std::string file_digest(const std::string& path);

// Executes the config's declared stages in order and writes
// <out_dir>/manifest.json. Throws ConfigError / DataError / ServiceError.
RunManifest run_pipeline(const std::string& config_path);

// Per-dataset pairs in/kept/filtered summary from curation reports, as an
// aligned text table plus the same rows as JSON.
struct Summary {
  std::string text;
  nlohmann::json rows;
};
Summary summarize(const std::vector<nlohmann::json>& curation_reports);

struct CurationReport;  // curation.hpp
nlohmann::json curation_report_to_json(const struct CurationReport& report);

}  // namespace curator
