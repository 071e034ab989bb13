#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace styleguide {

// Lower-case hex SHA-256 of the file contents.
std::string sha256_file(const std::filesystem::path& path);

// Writes dir/manifest.json holding the command, the resolved config and
// options, and a hash per artifact (artifact names are relative to dir).
void write_manifest(const std::filesystem::path& dir, const std::string& command, const nlohmann::json& config,
                    const nlohmann::json& options, const std::vector<std::string>& artifacts);

}  // namespace styleguide
