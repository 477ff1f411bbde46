#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vctrace {

/// ASCII case folding. Non-ASCII bytes pass through unchanged.
std::string fold(std::string_view s);

std::string_view trim(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

inline bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool is_identifier(std::string_view s);

/// Decimal number: optional sign, digits, optional fraction, optional exponent.
bool is_decimal_number(std::string_view s);

/// Lowercased alphanumeric tokens of `s`, deduplicated and sorted.
std::vector<std::string> token_set(std::string_view s);

/// Fixed-precision rendering used in tables and stats files.
std::string format_fixed(double v, int decimals);

}  // namespace vctrace
