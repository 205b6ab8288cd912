#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace rshe::csv {

/// 17 significant digits, so a parsed value round-trips exactly.
std::string format_double(double v);

/// RFC-4180 quoting: fields with comma, quote, CR or LF are quoted.
std::string escape(std::string_view field);

/// One record terminated by CRLF.
void write_row(std::ostream& os, const std::vector<std::string>& fields);

}  // namespace rshe::csv
