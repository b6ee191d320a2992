#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "keyfault/events.hpp"

namespace keyfault {

/// Line-delimited JSON: one header record, then one record per event.
///
///     {"schema":"keyfault-log","version":1,"session":"...","seed":42,"mode":"word",
///      "pt":0.15,"condition":"C4","digest":"..."}
///     {"t":0,"kind":"phrase","text":"have a good weekend"}
///     {"t":812,"kind":"key","ch":"h"}
///
/// Parse errors report the 1-based file line.
std::string serialize_log(const SessionLog& log);
SessionLog parse_log(std::string_view text);

SessionLog read_log_file(const std::filesystem::path& path);
void write_log_file(const std::filesystem::path& path, const SessionLog& log);

/// Serialises a single event record (no trailing newline).
std::string serialize_event(const SessionEvent& ev);

/// Rebuilds editor text from an event stream.
///
/// KeyDown inserts at the cursor, Backspace deletes before it, an applied
/// decision overwrites text[offset], a suggestion pick replaces its span and
/// PhraseShown clears the editor for a new task.
class TextReplay {
public:
    /// Returns false when the event cannot apply to the current text and was skipped.
    bool apply(const SessionEvent& ev);

    const std::string& text() const { return text_; }
    std::size_t cursor() const { return cursor_; }

private:
    std::string text_;
    std::size_t cursor_ = 0;
};

std::string replay_text(const std::vector<SessionEvent>& events);

/// One transcription task: the events from a PhraseShown up to its Submit.
struct PhraseTask {
    std::string target;
    std::vector<SessionEvent> events;

    /// Final text of the Submit event, if the task was submitted.
    const std::string* submitted() const;
};

/// Splits a session into tasks at each PhraseShown event. Events before
/// the first PhraseShown form a task with an empty target.
std::vector<PhraseTask> split_tasks(const std::vector<SessionEvent>& events);

}  // namespace keyfault
