#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

namespace amvi {

/// Shortest-form decimal with 12 significant digits; independent of the C locale.
inline std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value, std::chars_format::general, 12);
    if (result.ec != std::errc()) return "nan";
    return std::string(buffer, result.ptr);
}

} // namespace amvi
