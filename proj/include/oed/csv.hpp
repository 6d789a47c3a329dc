#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace oed::csv {

/// One comma-separated row, quoting fields that contain a comma, quote, CR or
/// LF. Terminated by CRLF.
std::string format_row(const std::vector<std::string>& fields);

/// Parses a whole document into rows. Throws IntegrityError on an
/// unterminated quoted field.
std::vector<std::vector<std::string>> parse(std::string_view text);

}  // namespace oed::csv
