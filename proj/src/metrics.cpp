#include "keyfault/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "keyfault/alphabet.hpp"
#include "keyfault/error.hpp"
#include "keyfault/substitution.hpp"

namespace keyfault {

namespace {

struct KeyCounts {
    std::size_t printable = 0;
    std::size_t backspaces = 0;
};

KeyCounts count_keys(const std::vector<SessionEvent>& events) {
    KeyCounts k;
    for (const auto& ev : events) {
        if (std::holds_alternative<event::KeyDown>(ev.kind)) ++k.printable;
        if (std::holds_alternative<event::Backspace>(ev.kind)) ++k.backspaces;
    }
    return k;
}

const event::Submit* find_submit(const std::vector<SessionEvent>& events) {
    for (auto it = events.rbegin(); it != events.rend(); ++it) {
        if (const auto* s = std::get_if<event::Submit>(&it->kind)) return s;
    }
    return nullptr;
}

std::optional<std::int64_t> submit_time(const std::vector<SessionEvent>& events) {
    for (auto it = events.rbegin(); it != events.rend(); ++it) {
        if (std::holds_alternative<event::Submit>(it->kind)) return it->t_ms;
    }
    return std::nullopt;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string drop_last_word(std::string_view normalized) {
    std::string_view s = trim(normalized);
    std::size_t end = s.size();
    while (end > 0 && !is_space(s[end - 1])) --end;
    return std::string(trim(s.substr(0, end)));
}

std::string normalize_word(std::string_view word) {
    std::string out;
    for (char c : word) {
        const auto u = static_cast<unsigned char>(c);
        if (is_space(c)) continue;
        if (std::ispunct(u) && c != '\'') continue;
        out.push_back(to_lower(c));
    }
    while (!out.empty() && out.front() == '\'') out.erase(out.begin());
    while (!out.empty() && out.back() == '\'') out.pop_back();
    return out;
}

// Everything observed in a set of phrase tasks, pooled before averaging.
struct Pool {
    std::vector<double> backspace_ratios;
    std::vector<double> suspect_ratios;
    std::vector<double> wpms;
    std::vector<double> gaps;
    std::map<std::size_t, std::vector<double>> run_pauses;
    std::map<std::size_t, std::size_t> histogram;
    std::vector<double> picks, serious, minor, acc_full, acc_last;

    void add(const std::vector<SessionEvent>& events, std::string_view target, const Dictionary& dict);
    MetricsReport finish() const;
};

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Gaps between consecutive keystrokes and the pause before each backspace run.
void collect_timing(const std::vector<SessionEvent>& events, std::vector<double>& gaps,
                    std::map<std::size_t, std::vector<double>>& run_pauses) {
    std::optional<std::int64_t> prev_key;
    std::optional<double> run_pause;
    std::size_t run = 0;
    auto close_run = [&] {
        if (run > 0 && run_pause) run_pauses[run].push_back(*run_pause);
        run = 0;
        run_pause.reset();
    };
    for (const auto& ev : events) {
        if (std::holds_alternative<event::CursorMove>(ev.kind)) {
            close_run();
            continue;
        }
        if (!ev.is_key()) continue;
        const bool bs = std::holds_alternative<event::Backspace>(ev.kind);
        if (bs) {
            if (run == 0 && prev_key) run_pause = static_cast<double>(ev.t_ms - *prev_key);
            ++run;
        } else {
            close_run();
        }
        if (prev_key) gaps.push_back(static_cast<double>(ev.t_ms - *prev_key));
        prev_key = ev.t_ms;
    }
    close_run();
}

void Pool::add(const std::vector<SessionEvent>& events, std::string_view target,
               const Dictionary& dict) {
    const KeyCounts k = count_keys(events);
    if (k.printable > 0) {
        backspace_ratios.push_back(static_cast<double>(k.backspaces) / static_cast<double>(k.printable));
        suspect_ratios.push_back(static_cast<double>(extract_suspects(events).pairs.size()) /
                                 static_cast<double>(k.printable));
    }
    try {
        wpms.push_back(wpm(events));
    } catch (const NoDuration&) {
    }
    collect_timing(events, gaps, run_pauses);
    for (const auto& [len, n] : backspace_runs(events)) histogram[len] += n;

    double n_picks = 0, n_serious = 0, n_minor = 0;
    for (const auto& ev : events) {
        if (std::holds_alternative<event::SuggestionPick>(ev.kind)) ++n_picks;
        if (const auto* c = std::get_if<event::WordCommit>(&ev.kind)) {
            if (dict.empty()) continue;
            const auto cls = classify_word(c->displayed, dict).kind;
            if (cls == WordClassKind::Serious) ++n_serious;
            if (cls == WordClassKind::Minor) ++n_minor;
        }
    }
    picks.push_back(n_picks);
    serious.push_back(n_serious);
    minor.push_back(n_minor);

    const Accuracy acc = accuracy(events, target);
    acc_full.push_back(static_cast<double>(acc.full));
    acc_last.push_back(static_cast<double>(acc.last_word_removed));
}

MetricsReport Pool::finish() const {
    MetricsReport r;
    r.backspace_ratio = mean(backspace_ratios);
    r.suspect_ratio = mean(suspect_ratios);
    r.wpm = mean(wpms);
    r.interkey_mean_ms = mean(gaps);
    r.interkey_sd_ms = sample_sd(gaps);
    r.picked_suggestions = mean(picks);
    r.serious_errors = mean(serious);
    r.minor_errors = mean(minor);
    r.accuracy_full = mean(acc_full);
    r.accuracy_last_word_removed = mean(acc_last);
    r.backspace_run_histogram = histogram;
    for (const auto& [len, v] : run_pauses) r.interkey_by_run_length[len] = mean(v);
    r.phrases = acc_full.size();
    return r;
}

}  // namespace

double backspace_ratio(const std::vector<SessionEvent>& events) {
    const KeyCounts k = count_keys(events);
    if (k.printable == 0) throw NoInput();
    return static_cast<double>(k.backspaces) / static_cast<double>(k.printable);
}

double suspect_ratio(const std::vector<SessionEvent>& events) {
    const KeyCounts k = count_keys(events);
    if (k.printable == 0) throw NoInput();
    return static_cast<double>(extract_suspects(events).pairs.size()) /
           static_cast<double>(k.printable);
}

double wpm(const std::vector<SessionEvent>& events) {
    const event::Submit* submit = find_submit(events);
    if (!submit) throw NotSubmitted();
    if (submit->final_text.empty()) return 0.0;
    std::optional<std::int64_t> first;
    for (const auto& ev : events) {
        if (ev.is_key()) {
            first = ev.t_ms;
            break;
        }
    }
    const std::int64_t end = *submit_time(events);
    if (!first || end <= *first) throw NoDuration();
    const double minutes = static_cast<double>(end - *first) / 60000.0;
    return (static_cast<double>(submit->final_text.size()) / 5.0) / minutes;
}

InterkeyStats interkey_stats(const std::vector<SessionEvent>& events) {
    std::vector<double> gaps;
    std::map<std::size_t, std::vector<double>> pauses;
    collect_timing(events, gaps, pauses);
    if (gaps.empty()) throw NoInput();
    InterkeyStats s;
    s.mean_ms = mean(gaps);
    s.sd_ms = sample_sd(gaps);
    for (const auto& [len, v] : pauses) s.by_run_length[len] = mean(v);
    return s;
}

std::map<std::size_t, std::size_t> backspace_runs(const std::vector<SessionEvent>& events) {
    std::map<std::size_t, std::size_t> hist;
    std::size_t run = 0;
    for (const auto& ev : events) {
        if (std::holds_alternative<event::Backspace>(ev.kind)) {
            ++run;
        } else if (std::holds_alternative<event::KeyDown>(ev.kind) ||
                   std::holds_alternative<event::CursorMove>(ev.kind) ||
                   std::holds_alternative<event::SuggestionPick>(ev.kind) ||
                   std::holds_alternative<event::PhraseShown>(ev.kind) ||
                   std::holds_alternative<event::Submit>(ev.kind)) {
            if (run) ++hist[run];
            run = 0;
        }
    }
    if (run) ++hist[run];
    return hist;
}

std::size_t run_length_percentile(const std::map<std::size_t, std::size_t>& histogram,
                                  double fraction) {
    std::size_t total = 0;
    for (const auto& [len, n] : histogram) total += n;
    if (total == 0) return 0;
    const double threshold = fraction * static_cast<double>(total);
    std::size_t cum = 0;
    for (const auto& [len, n] : histogram) {
        cum += n;
        if (static_cast<double>(cum) > threshold) return len;
    }
    return histogram.rbegin()->first;
}

std::string normalize_for_accuracy(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '.' || c == ',') continue;
        out.push_back(to_lower(c));
    }
    return std::string(trim(out));
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0u : 1u)});
            diag = up;
        }
    }
    return row[b.size()];
}

std::size_t normalized_levenshtein(std::string_view submitted, std::string_view target) {
    return levenshtein(normalize_for_accuracy(submitted), normalize_for_accuracy(target));
}

Accuracy accuracy(std::string_view submitted, std::string_view target) {
    const std::string s = normalize_for_accuracy(submitted);
    const std::string t = normalize_for_accuracy(target);
    return Accuracy{levenshtein(s, t), levenshtein(drop_last_word(s), drop_last_word(t))};
}

Accuracy accuracy(const std::vector<SessionEvent>& events, std::string_view target) {
    const event::Submit* submit = find_submit(events);
    if (!submit) throw NotSubmitted();
    return accuracy(submit->final_text, target);
}

const char* to_string(WordClassKind kind) {
    switch (kind) {
        case WordClassKind::Correct: return "correct";
        case WordClassKind::Minor: return "minor";
        case WordClassKind::Serious: return "serious";
    }
    return "correct";
}

const char* bar_color(WordClassKind kind) {
    switch (kind) {
        case WordClassKind::Correct: return "green";
        case WordClassKind::Minor: return "orange";
        case WordClassKind::Serious: return "red";
    }
    return "green";
}

const char* highlight_color(WordClassKind kind) {
    switch (kind) {
        case WordClassKind::Correct: return "";
        case WordClassKind::Minor: return "yellow";
        case WordClassKind::Serious: return "red";
    }
    return "";
}

WordClass classify_word(std::string_view word, const Dictionary& dictionary) {
    if (dictionary.empty()) throw NoDictionary();
    WordClass out;
    out.word = normalize_word(word);
    if (out.word.empty() || dictionary.contains(out.word)) return out;

    static constexpr std::string_view letters = "abcdefghijklmnopqrstuvwxyz'";
    std::set<std::string> hits;
    const std::string& w = out.word;
    std::string probe;
    for (std::size_t i = 0; i <= w.size(); ++i) {
        if (i < w.size()) {
            probe = w;
            probe.erase(i, 1);
            if (dictionary.contains(probe)) hits.insert(probe);
        }
        for (char c : letters) {
            probe = w;
            probe.insert(probe.begin() + static_cast<std::ptrdiff_t>(i), c);
            if (dictionary.contains(probe)) hits.insert(probe);
            if (i < w.size() && w[i] != c) {
                probe = w;
                probe[i] = c;
                if (dictionary.contains(probe)) hits.insert(probe);
            }
        }
    }
    if (!hits.empty()) {
        out.kind = WordClassKind::Minor;
        out.suggestions.assign(hits.begin(), hits.end());
        dictionary.rank(out.suggestions);
        return out;
    }

    out.kind = WordClassKind::Serious;
    std::vector<std::string> near;
    for (const auto& cand : dictionary.words()) {
        const std::size_t gap = cand.size() > w.size() ? cand.size() - w.size() : w.size() - cand.size();
        if (gap <= 2 && levenshtein(cand, w) <= 2) near.push_back(cand);
    }
    dictionary.rank(near);
    if (near.size() > 3) near.resize(3);
    out.suggestions = std::move(near);
    return out;
}

MetricsReport task_report(const PhraseTask& task, const Dictionary& dictionary) {
    Pool pool;
    pool.add(task.events, task.target, dictionary);
    return pool.finish();
}

MetricsReport session_report(const SessionLog& log, const Dictionary& dictionary) {
    Pool pool;
    for (const auto& task : split_tasks(log.events)) {
        if (!task.submitted()) continue;
        pool.add(task.events, task.target, dictionary);
    }
    if (pool.acc_full.empty()) throw NotSubmitted();
    return pool.finish();
}

MetricsReport session_report(const std::vector<SessionEvent>& events, std::string_view target,
                             const Dictionary& dictionary) {
    Pool pool;
    pool.add(events, target, dictionary);
    return pool.finish();
}

std::string report_to_json(const MetricsReport& r, std::string_view label) {
    nlohmann::json j;
    if (!label.empty()) j["label"] = std::string(label);
    j["phrases"] = r.phrases;
    j["backspace_ratio"] = r.backspace_ratio;
    j["suspect_ratio"] = r.suspect_ratio;
    j["wpm"] = r.wpm;
    j["interkey_mean_ms"] = r.interkey_mean_ms;
    j["interkey_sd_ms"] = r.interkey_sd_ms;
    j["picked_suggestions"] = r.picked_suggestions;
    j["serious_errors"] = r.serious_errors;
    j["minor_errors"] = r.minor_errors;
    j["accuracy_full"] = r.accuracy_full;
    j["accuracy_last_word_removed"] = r.accuracy_last_word_removed;
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [len, n] : r.backspace_run_histogram) hist[std::to_string(len)] = n;
    j["backspace_run_histogram"] = hist;
    nlohmann::json by_run = nlohmann::json::object();
    for (const auto& [len, ms] : r.interkey_by_run_length) by_run[std::to_string(len)] = ms;
    j["interkey_by_run_length"] = by_run;
    return j.dump();
}

std::string format_report_table(
    const std::vector<std::pair<std::string, std::vector<MetricsReport>>>& groups) {
    struct Row {
        const char* name;
        double MetricsReport::*field;
        int precision;
    };
    static const Row rows[] = {
        {"Backspace ratio", &MetricsReport::backspace_ratio, 3},
        {"Suspect key ratio", &MetricsReport::suspect_ratio, 3},
        {"WPM", &MetricsReport::wpm, 2},
        {"Inter-key Time (ms)", &MetricsReport::interkey_mean_ms, 1},
        {"Picked Suggestions", &MetricsReport::picked_suggestions, 2},
        {"Serious errors", &MetricsReport::serious_errors, 2},
        {"Minor errors", &MetricsReport::minor_errors, 2},
        {"Levenshtein distance", &MetricsReport::accuracy_full, 2},
        {"Levenshtein (last word removed)", &MetricsReport::accuracy_last_word_removed, 2},
    };

    constexpr int name_w = 32;
    constexpr int col_w = 10;
    std::ostringstream out;
    out << std::left << std::setw(name_w) << "";
    for (const auto& [label, reports] : groups) {
        out << std::right << std::setw(2 * col_w) << label;
    }
    out << '\n' << std::left << std::setw(name_w) << "Measure";
    for (std::size_t i = 0; i < groups.size(); ++i) {
        out << std::right << std::setw(col_w) << "M" << std::setw(col_w) << "SD";
    }
    out << '\n';

    auto cell = [&](double v, int precision) {
        std::ostringstream c;
        c << std::fixed << std::setprecision(precision) << v;
        out << std::right << std::setw(col_w) << c.str();
    };
    for (const Row& row : rows) {
        out << std::left << std::setw(name_w) << row.name;
        for (const auto& [label, reports] : groups) {
            std::vector<double> vals;
            for (const auto& r : reports) vals.push_back(r.*(row.field));
            cell(mean(vals), row.precision);
            cell(sample_sd(vals), row.precision);
        }
        out << '\n';
    }
    out << std::left << std::setw(name_w) << "p90 backspace run";
    for (const auto& [label, reports] : groups) {
        std::map<std::size_t, std::size_t> pooled;
        for (const auto& r : reports)
            for (const auto& [len, n] : r.backspace_run_histogram) pooled[len] += n;
        out << std::right << std::setw(col_w) << run_length_percentile(pooled) << std::setw(col_w) << "";
    }
    out << '\n';
    return out.str();
}

}  // namespace keyfault
