#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sincvae {

// Shortest round-trip decimal representation ('.' decimal separator).
std::string format_double(double value);

// Splits one CSV line on commas and trims surrounding whitespace of each field.
std::vector<std::string> split_csv_line(std::string_view line);

std::string trim(std::string_view text);

// Strict numeric parsing; the whole field must be consumed.
bool parse_double(std::string_view text, double& out);
bool parse_int64(std::string_view text, long long& out);

}  // namespace sincvae
