#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace achilles::csv {

/// Splits on commas; no quoting support (none of our formats need it).
std::vector<std::string_view> split(std::string_view line);

/// Strict decimal parse; the whole field must be consumed.
double parse_double(std::string_view field, std::string_view what);

/// Shortest text that parses back to the identical double.
std::string exact(double value);

/// Reads the next non-blank line, stripping a trailing '\r'. Returns false at EOF.
bool next_line(std::istream& in, std::string& line);

} // namespace achilles::csv
