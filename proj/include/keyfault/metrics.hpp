#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "keyfault/dictionary.hpp"
#include "keyfault/events.hpp"
#include "keyfault/session_log.hpp"

namespace keyfault {

/// Per-session measures. Counts marked "per sentence" are averages over the
/// session's phrase tasks.
struct MetricsReport {
    double backspace_ratio = 0.0;
    double suspect_ratio = 0.0;
    double wpm = 0.0;
    double interkey_mean_ms = 0.0;
    double interkey_sd_ms = 0.0;
    double picked_suggestions = 0.0;  ///< per sentence
    double serious_errors = 0.0;      ///< per sentence
    double minor_errors = 0.0;        ///< per sentence
    double accuracy_full = 0.0;       ///< mean edit distance per sentence
    double accuracy_last_word_removed = 0.0;
    std::map<std::size_t, std::size_t> backspace_run_histogram;
    std::map<std::size_t, double> interkey_by_run_length;
    std::size_t phrases = 0;

    bool operator==(const MetricsReport&) const = default;
};

/// Backspaces per printable keystroke. Throws NoInput without keystrokes.
double backspace_ratio(const std::vector<SessionEvent>& events);
/// Suspect pairs per printable keystroke. Throws NoInput.
double suspect_ratio(const std::vector<SessionEvent>& events);

/// (final text length / 5) per minute, first keystroke to submit.
/// Throws NotSubmitted without a Submit and NoDuration for a zero span.
double wpm(const std::vector<SessionEvent>& events);

struct InterkeyStats {
    double mean_ms = 0.0;
    double sd_ms = 0.0;  ///< sample standard deviation
    /// Mean pause before the first backspace of each run, by run length.
    std::map<std::size_t, double> by_run_length;
};

/// Throws NoInput with fewer than two keystrokes.
InterkeyStats interkey_stats(const std::vector<SessionEvent>& events);

/// Lengths of maximal consecutive-backspace runs. A keystroke or cursor
/// move ends a run.
std::map<std::size_t, std::size_t> backspace_runs(const std::vector<SessionEvent>& events);

/// Smallest run length whose cumulative share of runs exceeds `fraction`.
/// 0 for an empty histogram.
std::size_t run_length_percentile(const std::map<std::size_t, std::size_t>& histogram,
                                  double fraction = 0.9);

/// Lower case, every '.' and ',' removed, surrounding whitespace trimmed.
std::string normalize_for_accuracy(std::string_view s);

/// Unit-cost edit distance.
std::size_t levenshtein(std::string_view a, std::string_view b);
std::size_t normalized_levenshtein(std::string_view submitted, std::string_view target);

struct Accuracy {
    std::size_t full = 0;
    std::size_t last_word_removed = 0;
    bool operator==(const Accuracy&) const = default;
};

Accuracy accuracy(std::string_view submitted, std::string_view target);
/// Throws NotSubmitted.
Accuracy accuracy(const std::vector<SessionEvent>& events, std::string_view target);

enum class WordClassKind { Correct, Minor, Serious };

const char* to_string(WordClassKind kind);
/// Feedback bar colour: green, orange, red.
const char* bar_color(WordClassKind kind);
/// Highlight colour with autocorrect off: empty (none), yellow, red.
const char* highlight_color(WordClassKind kind);

struct WordClass {
    std::string word;  ///< normalised form
    WordClassKind kind = WordClassKind::Correct;
    std::vector<std::string> suggestions;
};

/// Correct if in the dictionary; Minor if some dictionary word is one edit
/// away (those words are the suggestions, most frequent first); Serious
/// otherwise, with the closest words within two edits as suggestions.
/// Throws NoDictionary.
WordClass classify_word(std::string_view word, const Dictionary& dictionary);

/// Metrics of a single phrase task.
MetricsReport task_report(const PhraseTask& task, const Dictionary& dictionary);
/// Metrics of a whole session log (every submitted phrase task).
MetricsReport session_report(const SessionLog& log, const Dictionary& dictionary);
MetricsReport session_report(const std::vector<SessionEvent>& events, std::string_view target,
                             const Dictionary& dictionary);

/// One JSON object per report, no trailing newline.
std::string report_to_json(const MetricsReport& report, std::string_view label = {});

/// Measures as rows, one mean/SD column pair per group label, in the
/// order given.
std::string format_report_table(
    const std::vector<std::pair<std::string, std::vector<MetricsReport>>>& groups);

}  // namespace keyfault
