#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rotmap::text {

/// Shortest decimal form that parses back to the same double.
std::string shortest(double value);

/// printf-style %.<digits>g.
std::string significant(double value, int digits = 6);

/// Fixed number of decimals, with "-0.0" normalized to "0.0".
std::string fixed(double value, int decimals);

/// Strict full-string number parse; throws FormatError naming `context`.
double parse_double(std::string_view token, std::string_view context);
long long parse_int(std::string_view token, std::string_view context);

std::string_view trim(std::string_view s);
std::string lower(std::string_view s);

/// Splits a CSV line on commas; no quoting (all emitted fields are plain).
std::vector<std::string> split_csv(std::string_view line);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace rotmap::text
