#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mew::csv {

/// Splits one CSV record. Handles double-quoted fields with "" escapes;
/// surrounding whitespace of unquoted fields is trimmed.
std::vector<std::string> split_record(std::string_view line);

/// Next non-empty line (CR stripped); false at end of stream.
bool next_line(std::istream& in, std::string& line);

/// Shortest representation that round-trips the double exactly.
std::string format_double(double v);

/// Parses a double; accepts nan/inf spellings. False when malformed.
bool parse_double(std::string_view s, double& out);

}  // namespace mew::csv
