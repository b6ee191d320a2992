#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "keyfault/events.hpp"

namespace keyfault {

/// The four study conditions: keyboard variant x injection.
enum class Condition { C1, C2, C3, C4 };

inline constexpr std::array<Condition, 4> kConditions = {Condition::C1, Condition::C2,
                                                         Condition::C3, Condition::C4};

const char* to_string(Condition c);
Condition parse_condition(std::string_view text);
/// C3 and C4 use the highlighting keyboard.
constexpr bool highlighting(Condition c) { return c == Condition::C3 || c == Condition::C4; }
/// C2 and C4 inject errors.
constexpr bool injected(Condition c) { return c == Condition::C2 || c == Condition::C4; }
constexpr std::size_t index_of(Condition c) { return static_cast<std::size_t>(c); }

struct PhraseSet {
    std::size_t id = 0;
    std::vector<std::string> phrases;

    double mean_length() const;
    bool operator==(const PhraseSet&) const = default;
};

/// Plain text, one phrase per line; blank lines and '#' lines are skipped.
std::vector<std::string> parse_phrases(std::string_view text);
std::vector<std::string> load_phrases(const std::filesystem::path& path);

/// Splits a phrase pool into `k` disjoint sets of `set_size` phrases whose
/// mean lengths differ pairwise by at most `tolerance` characters.
/// Throws InsufficientPhrases or PartitionFailed.
std::vector<PhraseSet> partition_phrases(const std::vector<std::string>& pool, std::size_t k,
                                         std::size_t set_size, std::uint64_t seed,
                                         double tolerance = 2.0);

struct StudyPlan {
    std::size_t participant = 0;
    std::array<Condition, 4> order{};
    /// Phrase-set id used under each condition, indexed by condition.
    std::array<std::size_t, 4> phrase_set{};

    bool operator==(const StudyPlan&) const = default;
};

/// Row `participant mod 4` of a balanced 4x4 Latin square.
std::array<Condition, 4> latin_square_row(std::size_t row);

/// Condition order from the Latin square; phrase-set assignment from a
/// seeded shuffle independent of the order.
StudyPlan make_plan(std::size_t participant_index, std::uint64_t seed);

std::string plan_to_json(const StudyPlan& plan);

}  // namespace keyfault
