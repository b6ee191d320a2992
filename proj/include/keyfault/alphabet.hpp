#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace keyfault {

/// The 29 characters the substitution model covers, in matrix order:
/// a..z, space, full stop, comma.
inline constexpr std::size_t kAlphabetSize = 29;
inline constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz .,";

constexpr std::optional<std::size_t> alphabet_index(char c) {
    if (c >= 'a' && c <= 'z') return static_cast<std::size_t>(c - 'a');
    if (c == ' ') return 26;
    if (c == '.') return 27;
    if (c == ',') return 28;
    return std::nullopt;
}

constexpr bool in_alphabet(char c) { return alphabet_index(c).has_value(); }

constexpr char alphabet_char(std::size_t index) { return kAlphabet[index]; }

constexpr bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
constexpr char to_lower(char c) { return is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }
constexpr char to_upper(char c) {
    return (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
}

/// Word terminators: finish the word being composed.
constexpr bool is_terminator(char c) { return c == ' ' || c == '.' || c == ',' || c == '\n'; }

}  // namespace keyfault
