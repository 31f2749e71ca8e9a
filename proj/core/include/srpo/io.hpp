#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace srpo {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

// Splits on '\n'; a trailing newline does not produce an empty last line.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// FNV-1a 64 of the file contents, hex encoded. Integrity checksum for
// manifests and checkpoint containers, not a cryptographic digest.
std::string file_checksum(const std::filesystem::path& path);
std::string checksum_hex(std::uint64_t h);

}  // namespace srpo
