#pragma once

#include <filesystem>
#include <map>
#include <string_view>
#include <vector>

namespace keyfault {

/// Key centroid and size in abstract layout units.
struct KeyGeom {
    double cx = 0.0;
    double cy = 0.0;
    double w = 1.0;
    double h = 1.0;
};

/// Soft-keyboard geometry. Immutable once loaded.
class KeyboardLayout {
public:
    KeyboardLayout(std::map<char, KeyGeom> keys, char standard_key);

    bool contains(char c) const { return keys_.count(c) != 0; }
    /// Throws MissingKey.
    const KeyGeom& key(char c) const;
    const std::map<char, KeyGeom>& keys() const { return keys_; }

    /// Standard key distance: half the sum of the standard letter key's width and height.
    double unit_k() const { return unit_k_; }
    char standard_key() const { return standard_key_; }

    /// Unclamped centroid distance in k units.
    double raw_distance(char a, char b) const;

private:
    std::map<char, KeyGeom> keys_;
    char standard_key_;
    double unit_k_;
};

/// Parses the line-oriented layout format:
///
///     # comment
///     standard a              (optional; reference key for k, defaults to 'a')
///     <char-or-token> <cx> <cy> <w> <h>
///
/// Tokens SPACE, PERIOD and COMMA name the non-letter alphabet keys.
/// Throws ParseError on a malformed line and MissingKey when one of the
/// 29 alphabet characters has no key.
KeyboardLayout load_layout(std::string_view spec_text);
KeyboardLayout load_layout_file(const std::filesystem::path& path);

/// Distance in k units, clamped below at 1.0. Symmetric.
double key_distance(const KeyboardLayout& layout, char a, char b);

/// Neighbour cutoff, in k units.
inline constexpr double kNeighbourRadius = 2.0;

/// Alphabet characters whose raw distance from `c` is at most 2k, including `c`.
/// Sorted by alphabet index.
std::vector<char> neighbor_set(const KeyboardLayout& layout, char c);

}  // namespace keyfault
