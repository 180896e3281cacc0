#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace bmt {

inline constexpr const char* kToolVersion = "0.1.0";

// Reproducibility record emitted for every CLI run. Timestamps live only
// here, so artifact files stay byte-identical across reruns.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::string config_hash;  // sha256 over the resolved settings
  std::vector<std::pair<std::string, std::string>> input_digests;  // path -> sha256
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  double wall_time_s = 0.0;
  std::string timestamp_utc;
};

void write_run_manifest(const std::filesystem::path& path, const RunManifest& manifest);

std::string utc_timestamp_now();

}  // namespace bmt
