#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace keyfault {

/// Lower-case wordlist with optional frequencies.
///
/// File format: one word per line, optionally followed by whitespace and an
/// integer frequency; '#' starts a comment line. Words without a frequency
/// get 1.
class Dictionary {
public:
    Dictionary() = default;
    static Dictionary parse(std::string_view text);
    static Dictionary load(const std::filesystem::path& path);

    void add(std::string word, std::uint64_t frequency = 1);

    bool empty() const { return freq_.empty(); }
    std::size_t size() const { return freq_.size(); }
    bool contains(std::string_view word) const;
    /// 0 when absent.
    std::uint64_t frequency(std::string_view word) const;

    /// Words in dictionary order (most frequent first for a ranked file).
    const std::vector<std::string>& words() const { return order_; }

    /// Up to `limit` words starting with `prefix`, most frequent first.
    std::vector<std::string> completions(std::string_view prefix, std::size_t limit) const;

    /// Orders words by descending frequency, then alphabetically.
    void rank(std::vector<std::string>& words) const;

private:
    std::unordered_map<std::string, std::uint64_t> freq_;
    std::vector<std::string> order_;
};

}  // namespace keyfault
