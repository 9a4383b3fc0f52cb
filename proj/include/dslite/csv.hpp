#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dslite::csv {

// RFC 4180 style: fields containing a comma, quote or newline are quoted and
// inner quotes doubled.
std::string quote(std::string_view field);

// Splits one line. Throws DataError on an unterminated quote.
std::vector<std::string> split(std::string_view line);

std::string trim(std::string_view s);

}  // namespace dslite::csv
