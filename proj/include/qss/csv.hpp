#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qss::csv {

/// Splits one CSV line on commas. Quoting is not supported; none of the
/// formats this library reads or writes needs it.
std::vector<std::string> split(std::string_view line, char sep = ',');

std::string_view trim(std::string_view s);

/// Strict parse: the whole field must be a finite decimal number.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

/// Shortest text that carries 17 significant digits ("%.17g").
std::string format(double v);

/// Reads every line of a text file, stripping a trailing '\r'.
std::vector<std::string> read_lines(const std::string& path);

}  // namespace qss::csv
