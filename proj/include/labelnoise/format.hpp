#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace labelnoise {

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

/// Parses the whole of `text` (surrounding blanks ignored) as a double.
std::optional<double> parse_double(std::string_view text);

} // namespace labelnoise
