#include "bmt/manifest.hpp"

#include <ctime>

#include <json.hpp>

#include "bmt/io_util.hpp"

namespace bmt {

std::string utc_timestamp_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_run_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["argv"] = manifest.argv;
  j["config_hash"] = manifest.config_hash;
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [p, digest] : manifest.input_digests)
    inputs.push_back({{"path", p}, {"sha256", digest}});
  j["inputs"] = inputs;
  j["seed"] = manifest.seed;
  j["tool_version"] = manifest.tool_version;
  j["wall_time_s"] = manifest.wall_time_s;
  j["timestamp_utc"] = manifest.timestamp_utc;
  atomic_write_text(path, j.dump(2) + "\n");
}

}  // namespace bmt
