#pragma once

#include <filesystem>
#include <string>

namespace safemon {

/// Writes `content` to a temporary sibling and renames it over `path`, so a
/// reader never sees a partial file. Parent directories are created. Throws
/// IoError naming the path.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Whole-file read; throws IoError naming the path.
std::string read_file(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace safemon
