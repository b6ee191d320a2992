#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "keyfault/events.hpp"
#include "keyfault/injection.hpp"

namespace keyfault {

/// A text editor driven by user actions, with injection applied and every
/// action and its consequences appended to a session log.
///
/// Ending a word (terminator key, cursor move, suggestion pick, submit)
/// logs the commit's decisions and a WordCommit before the action itself.
/// Timestamps must not decrease; a violation throws StreamError carrying
/// the index of the offending log event.
class TypingSession {
public:
    explicit TypingSession(InjectionConfig config, SessionHeader header = {});

    /// Starts a transcription task: clears the editor and, when `seed` is
    /// given, restarts the injection state from it.
    void show_phrase(std::int64_t t, const std::string& phrase,
                     std::optional<std::uint64_t> seed = std::nullopt);
    /// Returns the character that reached the screen.
    char key(std::int64_t t, char c, bool slip = false, bool physical = false);
    void backspace(std::int64_t t);
    void move_cursor(std::int64_t t, std::size_t index);
    void pick_suggestion(std::int64_t t, std::size_t start, std::size_t length,
                         const std::string& word);
    const std::string& submit(std::int64_t t);

    /// Server receive time attached to subsequently logged events.
    void set_receive_time(std::optional<std::int64_t> rt) { received_ = rt; }

    const std::string& text() const { return text_; }
    std::size_t cursor() const { return cursor_; }
    const SessionLog& log() const { return log_; }
    SessionLog& log() { return log_; }
    const InjectionState& injection() const { return state_; }
    bool composing() const { return !state_.word().empty(); }

    /// The word commit triggered by the most recent action, if any.
    const std::optional<CommitOutcome>& last_commit() const { return last_commit_; }

    /// Every decision logged so far, in order.
    std::vector<InjectionDecision> decisions() const;

private:
    void stamp(std::int64_t t);
    void append(std::int64_t t, EventKind kind);
    void commit(std::int64_t t);
    void insert(char c);

    InjectionState state_;
    SessionLog log_;
    std::string text_;
    std::size_t cursor_ = 0;
    std::int64_t last_t_ = 0;
    std::optional<std::int64_t> received_;
    std::optional<CommitOutcome> last_commit_;
};

struct StreamResult {
    std::string output_text;
    std::vector<InjectionDecision> decisions;
    SessionLog log;
};

/// Replays user actions (KeyDown, Backspace, CursorMove, SuggestionPick,
/// PhraseShown, Submit) through a TypingSession. Deterministic in
/// (config, events). Throws StreamError(offset) for a malformed event,
/// where offset indexes `input_events`.
StreamResult run_stream(const InjectionConfig& config, const std::vector<SessionEvent>& input_events);

}  // namespace keyfault
