#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace provar::cli {

struct InputDigest {
  std::string path;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

/// Hex SHA-256 of a file's bytes.
InputDigest digest_file(const std::string& path);

/// Record of one command invocation, enough to re-run it exactly.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::vector<InputDigest> inputs;
  std::uint64_t master_seed = 0;
  bool seed_generated = false;
  std::string tool_version;
  std::string timestamp;

  /// argv with --seed pinned to master_seed.
  std::vector<std::string> replay_argv() const;
  nlohmann::json to_json() const;
};

/// UTC time as ISO 8601.
std::string utc_timestamp();

}  // namespace provar::cli
