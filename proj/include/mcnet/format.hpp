#pragma once

#include <string>
#include <string_view>

namespace mcnet {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

// Strict full-string parse; throws mcnet::Error on trailing garbage.
double parse_double(std::string_view text);
long long parse_integer(std::string_view text);

} // namespace mcnet
