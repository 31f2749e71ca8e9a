#include "srpo/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include "json_io.hpp"
#include "srpo/errors.hpp"
#include "srpo/io.hpp"
#include "srpo/version.hpp"

namespace srpo {

using jsonio::json;

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

void write_manifest(const RunManifest& m, const std::filesystem::path& file) {
  json j{
      {"schema", m.schema},
      {"subcommand", m.subcommand},
      {"tool_version", m.tool_version.empty() ? kToolVersion : m.tool_version},
      {"master_seed", m.master_seed},
      {"config", jsonio::parse_or_data_error(m.config_json.empty() ? "{}" : m.config_json, "manifest config")},
      {"inputs", m.inputs},
      {"outputs", m.outputs},
      {"started_at", m.started_at},
      {"finished_at", m.finished_at},
      {"notes", m.notes},
  };
  write_file(file, j.dump(2) + "\n");
}

RunManifest read_manifest(const std::filesystem::path& file) {
  const json j = jsonio::parse_or_data_error(read_file(file), file.string());
  RunManifest m;
  m.schema = j.at("schema").get<int>();
  if (m.schema != kManifestSchemaVersion)
    throw DataError("manifest schema version unsupported: " + file.string());
  m.subcommand = j.at("subcommand").get<std::string>();
  m.tool_version = j.at("tool_version").get<std::string>();
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  m.config_json = j.at("config").dump();
  m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  m.started_at = j.value("started_at", "");
  m.finished_at = j.value("finished_at", "");
  if (j.contains("notes")) m.notes = j.at("notes").get<std::map<std::string, std::string>>();
  return m;
}

void verify_manifest_outputs(const RunManifest& m, const std::filesystem::path& manifest_dir) {
  for (const auto& [rel, expected] : m.outputs) {
    const std::filesystem::path p = manifest_dir / rel;
    if (!std::filesystem::exists(p)) throw DataError("manifest output missing: " + p.string());
    const std::string actual = file_checksum(p);
    if (actual != expected)
      throw DataError("integrity error: checksum mismatch for " + p.string() + " (expected " + expected +
                      ", found " + actual + ")");
  }
}

}  // namespace srpo
