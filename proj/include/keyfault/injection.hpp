#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "keyfault/events.hpp"
#include "keyfault/geometry.hpp"
#include "keyfault/rng.hpp"
#include "keyfault/substitution.hpp"

namespace keyfault {

/// Layout, matrix and the per-character candidate sets derived from them.
/// Immutable; share one instance across sessions.
class InjectionModel {
public:
    InjectionModel(KeyboardLayout layout, SubstitutionMatrix matrix);

    const KeyboardLayout& layout() const { return layout_; }
    const SubstitutionMatrix& matrix() const { return matrix_; }

    /// S' for an alphabet character (lower case).
    const CandidateSet& candidates(char c) const;

    /// Draws a substitute for `c` from its candidate distribution,
    /// conditional on `c` having been selected as a candidate.
    char draw_substitute(char c, Rng& rng) const;

    /// Short hex digest of layout and matrix contents.
    const std::string& digest() const { return digest_; }

private:
    struct Table {
        CandidateSet set;
        std::vector<double> cumulative;  ///< normalised to end at 1.0
    };

    KeyboardLayout layout_;
    SubstitutionMatrix matrix_;
    std::array<Table, kAlphabetSize> tables_;
    std::string digest_;
};

struct InjectionConfig {
    InjectionMode mode = InjectionMode::Off;
    double p_t = 0.15;
    std::uint64_t seed = 0;
    std::shared_ptr<const InjectionModel> model;
};

/// Replacement cap for a word of `word_len` characters: max(1, floor(L/4)).
std::size_t cap(std::size_t word_len);

struct PendingSubstitution {
    std::size_t index = 0;  ///< position within the word
    char original = 0;
    char substitute = 0;

    bool operator==(const PendingSubstitution&) const = default;
};

/// The word being composed.
struct WordBuffer {
    std::string chars;    ///< as shown while composing
    std::string typed;    ///< keys actually pressed
    std::size_t start = 0;  ///< text offset of the first character
    std::vector<PendingSubstitution> pending;  ///< PerWord only; indices increasing

    bool empty() const { return chars.empty(); }
};

struct KeyOutcome {
    char emitted = 0;
    std::optional<InjectionDecision> decision;
};

struct CommitOutcome {
    std::string typed;
    std::string displayed;
    std::size_t start = 0;
    std::vector<InjectionDecision> decisions;
};

/// Per-session injection state. One instance per typing session.
class InjectionState {
public:
    explicit InjectionState(InjectionConfig config);

    const InjectionConfig& config() const { return config_; }
    const WordBuffer& word() const { return word_; }

    /// Keypress-time substitution. `offset` is the text position the key lands at.
    KeyOutcome on_keystroke_v1(char c, std::size_t offset);
    /// Records the key in the word buffer and possibly marks it for
    /// substitution at commit. Always returns `c`.
    char on_keystroke_v2(char c, std::size_t offset);
    /// Drops the last buffered character; a pending substitution on it is
    /// returned as an unapplied decision.
    std::vector<InjectionDecision> on_backspace_v2();
    /// Enforces the cap and applies surviving substitutions to the word.
    CommitOutcome commit_word_v2();

    /// Mode dispatch for a non-terminator key. Tracks the word buffer in every mode.
    KeyOutcome on_key(char c, std::size_t offset);
    std::vector<InjectionDecision> on_backspace();
    CommitOutcome commit_word();

    /// Forgets the current word without applying anything (new task).
    void reset_word() { word_ = WordBuffer{}; }

private:
    bool selects_candidate();
    void push_char(char shown, char typed, std::size_t offset);

    InjectionConfig config_;
    Rng rng_;
    WordBuffer word_;
};

}  // namespace keyfault
