#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace comedia {

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`, so readers never
/// observe a partial file. Creates parent directories.
void atomic_write(const std::filesystem::path& path, std::string_view data);

std::string utc_timestamp();

}  // namespace comedia
