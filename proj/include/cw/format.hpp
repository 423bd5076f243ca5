#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace cw {

// Shortest decimal text that parses back to exactly the same double.
std::string format_number(double value);

// Fixed-point rendering used by report tables ("%.{digits}f"); non-finite
// values render as "Inf", "-Inf" or "NaN".
std::string format_fixed(double value, int digits);

// Parses the whole of `text` (surrounding blanks allowed) as a double.
std::optional<double> parse_number(std::string_view text);

std::string trim(std::string_view text);

}  // namespace cw
