#pragma once

#include <filesystem>
#include <string>

namespace vrs {

/// Current UTC time as an ISO-8601 string with millisecond precision.
std::string iso8601_now();

std::string read_text_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Shortest decimal form that round-trips the double exactly.
std::string format_double(double value);

}  // namespace vrs
