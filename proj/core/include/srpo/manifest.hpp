#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace srpo {

// Reproducibility record written beside every run's outputs. Re-running
// with the manifest's config and seed reproduces the output checksums.
struct RunManifest {
  std::string subcommand;
  std::string tool_version;
  int schema = 1;
  std::uint64_t master_seed = 0;
  std::string config_json;  // fully resolved configuration
  std::map<std::string, std::string> inputs;   // path -> checksum
  std::map<std::string, std::string> outputs;  // path -> checksum
  std::string started_at;
  std::string finished_at;
  std::map<std::string, std::string> notes;
};

void write_manifest(const RunManifest& m, const std::filesystem::path& file);
RunManifest read_manifest(const std::filesystem::path& file);

// Recomputes every output checksum relative to the manifest's directory;
// throws DataError naming the first mismatching file.
void verify_manifest_outputs(const RunManifest& m, const std::filesystem::path& manifest_dir);

std::string iso8601_now();

}  // namespace srpo
