#include "keyfault/substitution.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

#include "keyfault/error.hpp"
#include "keyfault/session_log.hpp"

namespace keyfault {

std::uint64_t SubstitutionMatrix::count(char intended, char typed) const {
    const auto r = alphabet_index(intended);
    const auto c = alphabet_index(typed);
    if (!r || !c) return 0;
    return counts_[*r][*c];
}

void SubstitutionMatrix::add(char intended, char typed, std::uint64_t n) {
    const auto r = alphabet_index(intended);
    const auto c = alphabet_index(typed);
    if (!r || !c) throw Error("character outside the substitution alphabet");
    counts_[*r][*c] += n;
}

void SubstitutionMatrix::merge(const SubstitutionMatrix& other) {
    for (std::size_t r = 0; r < kAlphabetSize; ++r)
        for (std::size_t c = 0; c < kAlphabetSize; ++c) counts_[r][c] += other.counts_[r][c];
}

std::uint64_t SubstitutionMatrix::total() const {
    std::uint64_t sum = 0;
    for (const auto& row : counts_)
        for (auto v : row) sum += v;
    return sum;
}

std::size_t SubstitutionMatrix::nonzero() const {
    std::size_t n = 0;
    for (const auto& row : counts_)
        for (auto v : row) n += v != 0;
    return n;
}

std::string format_matrix(const SubstitutionMatrix& m) {
    std::ostringstream out;
    out << "# rows = intended, columns = typed; alphabet: abcdefghijklmnopqrstuvwxyz SPACE PERIOD COMMA\n";
    for (std::size_t r = 0; r < kAlphabetSize; ++r) {
        for (std::size_t c = 0; c < kAlphabetSize; ++c) {
            if (c) out << ' ';
            out << m.at(r, c);
        }
        out << '\n';
    }
    return out.str();
}

SubstitutionMatrix parse_matrix(std::string_view text) {
    SubstitutionMatrix m;
    std::size_t line_no = 0;
    std::size_t row = 0;
    while (!text.empty()) {
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

        std::size_t col = 0;
        std::size_t i = 0;
        while (i < line.size()) {
            if (line[i] == ' ' || line[i] == '\t' || line[i] == '\r') {
                ++i;
                continue;
            }
            std::uint64_t v = 0;
            auto [ptr, ec] = std::from_chars(line.data() + i, line.data() + line.size(), v);
            const std::size_t used = static_cast<std::size_t>(ptr - (line.data() + i));
            if (ec != std::errc() || used == 0 ||
                (ptr != line.data() + line.size() && *ptr != ' ' && *ptr != '\t' && *ptr != '\r')) {
                throw ParseError(line_no, "expected a non-negative integer");
            }
            if (row >= kAlphabetSize) throw ParseError(line_no, "more than 29 rows");
            if (col >= kAlphabetSize) throw ParseError(line_no, "more than 29 columns");
            if (v) m.add(alphabet_char(row), alphabet_char(col), v);
            ++col;
            i += used;
        }
        if (col == 0) continue;
        if (col != kAlphabetSize) throw ParseError(line_no, "expected 29 columns");
        ++row;
    }
    if (row != kAlphabetSize) throw ParseError(line_no, "expected 29 rows");
    return m;
}

SubstitutionMatrix load_matrix_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open matrix file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_matrix(buf.str());
}

void save_matrix_file(const std::filesystem::path& path, const SubstitutionMatrix& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write matrix file " + path.string());
    out << format_matrix(m);
    if (!out.flush()) throw Error("write failed for " + path.string());
}

SuspectScan extract_suspects(const std::vector<SessionEvent>& events,
                             const std::string& session_id) {
    SuspectScan scan;
    TextReplay replay;

    // Open deletion run: characters removed so far and where the cursor sits.
    struct Run {
        char leftmost = 0;
        std::size_t position = 0;
    };
    std::optional<Run> run;
    // A finished run waiting for the next text edit.
    std::optional<Run> waiting;
    // Keystroke that landed at a waiting run's position; resolved once any
    // decisions attached to it have been applied.
    struct Retype {
        Run run;
        std::size_t event_index;
    };
    std::optional<Retype> retype;

    auto resolve_retype = [&] {
        if (!retype) return;
        const std::size_t pos = retype->run.position;
        if (pos < replay.text().size()) {
            const char intended = to_lower(replay.text()[pos]);
            const char typed = to_lower(retype->run.leftmost);
            if (in_alphabet(intended) && in_alphabet(typed) && intended != typed) {
                scan.pairs.push_back(SuspectPair{intended, typed, session_id, retype->event_index});
            }
        }
        retype.reset();
    };

    for (std::size_t i = 0; i < events.size(); ++i) {
        const SessionEvent& ev = events[i];
        const bool is_decision = std::holds_alternative<event::Decision>(ev.kind);
        if (!is_decision) resolve_retype();

        if (std::holds_alternative<event::Backspace>(ev.kind)) {
            waiting.reset();
            const std::size_t cur = replay.cursor();
            if (cur > 0) {
                const char deleted = replay.text()[cur - 1];
                if (run && run->position == cur) {
                    run->leftmost = deleted;
                    run->position = cur - 1;
                } else {
                    run = Run{deleted, cur - 1};
                }
            }
        } else if (std::holds_alternative<event::KeyDown>(ev.kind)) {
            if (run) waiting = run;
            run.reset();
            if (waiting && waiting->position == replay.cursor()) {
                retype = Retype{*waiting, i};
            }
            waiting.reset();
        } else if (std::holds_alternative<event::CursorMove>(ev.kind) ||
                   std::holds_alternative<event::SuggestionPick>(ev.kind) ||
                   std::holds_alternative<event::PhraseShown>(ev.kind) ||
                   std::holds_alternative<event::Submit>(ev.kind)) {
            run.reset();
            waiting.reset();
        }

        if (!replay.apply(ev)) ++scan.malformed;
    }
    resolve_retype();
    return scan;
}

SuspectScan extract_suspects(const SessionLog& log) {
    return extract_suspects(log.events, log.header.session_id);
}

MatrixBuild build_matrix(std::span<const SuspectPair> pairs) {
    MatrixBuild out;
    for (const auto& p : pairs) {
        if (!in_alphabet(p.intended) || !in_alphabet(p.typed)) {
            ++out.skipped;
            continue;
        }
        out.matrix.add(p.intended, p.typed);
    }
    return out;
}

CandidateSet build_candidate_set(char origin, std::span<const Candidate> neighbours) {
    CandidateSet cs;
    cs.origin = origin;
    std::uint64_t zero = 0;
    for (const auto& n : neighbours) {
        if (n.frequency == 0) {
            ++zero;
        } else {
            cs.entries.push_back(n);
        }
    }
    if (cs.entries.empty()) {
        // Keeping only {origin} would make every injection a no-op.
        cs.uniform_fallback = true;
        for (const auto& n : neighbours) cs.entries.push_back(Candidate{n.ch, 1, n.distance});
        return cs;
    }
    if (zero > 0) cs.entries.insert(cs.entries.begin(), Candidate{origin, zero, 1.0});
    return cs;
}

CandidateSet build_candidate_set(const SubstitutionMatrix& matrix, const KeyboardLayout& layout,
                                 char c) {
    if (!in_alphabet(c)) throw Error(std::string("'") + c + "' is outside the substitution alphabet");
    std::vector<Candidate> raw;
    for (char n : neighbor_set(layout, c)) {
        if (n == c) continue;
        raw.push_back(Candidate{n, matrix.count(c, n), key_distance(layout, c, n)});
    }
    return build_candidate_set(c, raw);
}

std::map<char, double> substitution_distribution(const CandidateSet& cs, double p_t) {
    if (cs.entries.empty()) throw EmptyCandidateSet();
    std::map<char, double> out;
    if (cs.uniform_fallback) {
        const double each = p_t / static_cast<double>(cs.entries.size());
        for (const auto& e : cs.entries) out[e.ch] += each;
        return out;
    }
    double norm = 0.0;
    for (const auto& e : cs.entries) norm += static_cast<double>(e.frequency) / e.distance;
    for (const auto& e : cs.entries) {
        out[e.ch] += p_t * (static_cast<double>(e.frequency) / e.distance) / norm;
    }
    return out;
}

}  // namespace keyfault
