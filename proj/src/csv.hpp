#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace comedia::csv {

/// RFC 4180: quoted fields may hold commas, doubled quotes and newlines.
/// Throws InvalidArgument on an unterminated quote.
std::vector<std::vector<std::string>> parse(std::string_view text);

std::string field(std::string_view value);
std::string row(const std::vector<std::string>& fields);

}  // namespace comedia::csv
