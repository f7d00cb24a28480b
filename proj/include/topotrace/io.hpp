#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace topotrace {

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place, so a
/// reader never observes a partially written output.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace topotrace
