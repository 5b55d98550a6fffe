#pragma once

#include <filesystem>
#include <string_view>

namespace fpcav::io {

/// Writes to a temporary sibling and renames it over `path`, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Shortest decimal representation that round-trips through strtod.
std::string format_double(double value);

}  // namespace fpcav::io
