#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace medtx {

/// RFC 4180-style reader: comma delimiter, double-quoted fields with ""
/// escapes, embedded newlines inside quotes, CRLF or LF row endings.
/// Blank lines are skipped.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Quotes a field when it contains a comma, quote, or line break.
std::string csv_escape(std::string_view field);

}  // namespace medtx
