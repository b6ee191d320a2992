#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace keyfault {

enum class InjectionMode { Off, PerKey, PerWord };

const char* to_string(InjectionMode mode);
/// Accepts "off", "key"/"perkey", "word"/"perword". Throws Error otherwise.
InjectionMode parse_mode(const std::string& text);

/// Audit record for one substitution candidate.
/// `applied` is false only for PerWord substitutions evicted by the cap or
/// discarded by a backspace.
struct InjectionDecision {
    std::size_t offset = 0;  ///< text position of the affected character
    char original = 0;
    char emitted = 0;
    InjectionMode mode = InjectionMode::PerKey;
    bool applied = true;

    bool operator==(const InjectionDecision&) const = default;
};

namespace event {

struct KeyDown {
    char ch = 0;
    bool slip = false;      ///< simulator provenance: the typist's own error
    bool physical = false;  ///< entered from a hardware keyboard
    bool operator==(const KeyDown&) const = default;
};
struct Backspace {
    bool operator==(const Backspace&) const = default;
};
struct CursorMove {
    std::size_t index = 0;
    bool operator==(const CursorMove&) const = default;
};
/// Replaces text[start, start+length) with `word`.
struct SuggestionPick {
    std::string word;
    std::size_t start = 0;
    std::size_t length = 0;
    bool operator==(const SuggestionPick&) const = default;
};
struct WordCommit {
    std::string typed;
    std::string displayed;
    std::size_t start = 0;
    bool operator==(const WordCommit&) const = default;
};
struct Decision {
    InjectionDecision record;
    bool operator==(const Decision&) const = default;
};
struct PhraseShown {
    std::string text;
    bool operator==(const PhraseShown&) const = default;
};
struct Submit {
    std::string final_text;
    bool operator==(const Submit&) const = default;
};

}  // namespace event

using EventKind = std::variant<event::KeyDown, event::Backspace, event::CursorMove,
                               event::SuggestionPick, event::WordCommit, event::Decision,
                               event::PhraseShown, event::Submit>;

struct SessionEvent {
    std::int64_t t_ms = 0;                   ///< client time since session start
    std::optional<std::int64_t> received_ms; ///< server receive time, live sessions only
    EventKind kind;

    bool operator==(const SessionEvent&) const = default;

    /// Keystroke events: KeyDown and Backspace.
    bool is_key() const {
        return std::holds_alternative<event::KeyDown>(kind) ||
               std::holds_alternative<event::Backspace>(kind);
    }
};

struct SessionHeader {
    int schema_version = 1;
    std::string session_id;
    std::uint64_t seed = 0;
    InjectionMode mode = InjectionMode::Off;
    double p_t = 0.0;
    std::string condition;
    std::string config_digest;

    bool operator==(const SessionHeader&) const = default;
};

struct SessionLog {
    SessionHeader header;
    std::vector<SessionEvent> events;

    bool operator==(const SessionLog&) const = default;
};

}  // namespace keyfault
