#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cura {

// Shortest decimal form that parses back to the identical double.
std::string fmt_double(double v);

// Strict double parse of a full token; throws std::runtime_error on junk.
double parse_double(std::string_view token, const std::string& context);

// Split one CSV line on commas (no quoting in any of our formats).
std::vector<std::string_view> split_csv_line(std::string_view line);

// Write via temp file + rename so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path,
                       std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace cura
