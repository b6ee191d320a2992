#include "keyfault/injection.hpp"

#include <algorithm>
#include <cstdio>

#include "keyfault/alphabet.hpp"
#include "keyfault/error.hpp"

namespace keyfault {

namespace {

char match_case(char like, char c) { return is_upper(like) ? to_upper(c) : c; }

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

InjectionModel::InjectionModel(KeyboardLayout layout, SubstitutionMatrix matrix)
    : layout_(std::move(layout)), matrix_(std::move(matrix)) {
    for (std::size_t i = 0; i < kAlphabetSize; ++i) {
        Table& t = tables_[i];
        t.set = build_candidate_set(matrix_, layout_, alphabet_char(i));
        if (t.set.entries.empty()) throw EmptyCandidateSet();
        const auto dist = substitution_distribution(t.set, 1.0);
        double acc = 0.0;
        for (const auto& e : t.set.entries) {
            acc += dist.at(e.ch);
            t.cumulative.push_back(acc);
        }
        for (auto& v : t.cumulative) v /= acc;
    }

    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [c, g] : layout_.keys()) {
        h = fnv1a(h, &c, 1);
        const double vals[4] = {g.cx, g.cy, g.w, g.h};
        h = fnv1a(h, vals, sizeof vals);
    }
    for (std::size_t r = 0; r < kAlphabetSize; ++r)
        for (std::size_t c = 0; c < kAlphabetSize; ++c) {
            const std::uint64_t v = matrix_.at(r, c);
            h = fnv1a(h, &v, sizeof v);
        }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    digest_ = buf;
}

const CandidateSet& InjectionModel::candidates(char c) const {
    const auto idx = alphabet_index(c);
    if (!idx) throw Error(std::string("'") + c + "' is outside the substitution alphabet");
    return tables_[*idx].set;
}

char InjectionModel::draw_substitute(char c, Rng& rng) const {
    const auto idx = alphabet_index(c);
    if (!idx) return c;
    const Table& t = tables_[*idx];
    const double u = rng.uniform();
    const auto it = std::upper_bound(t.cumulative.begin(), t.cumulative.end(), u);
    const std::size_t pick =
        std::min(static_cast<std::size_t>(it - t.cumulative.begin()), t.cumulative.size() - 1);
    return t.set.entries[pick].ch;
}

std::size_t cap(std::size_t word_len) { return std::max<std::size_t>(1, word_len / 4); }

InjectionState::InjectionState(InjectionConfig config)
    : config_(std::move(config)), rng_(config_.seed) {
    if (!(config_.p_t >= 0.0 && config_.p_t <= 1.0)) throw Error("p_t must lie in [0, 1]");
    if (config_.mode != InjectionMode::Off && !config_.model) {
        throw Error("injection requires a model");
    }
}

bool InjectionState::selects_candidate() { return rng_.uniform() < config_.p_t; }

void InjectionState::push_char(char shown, char typed, std::size_t offset) {
    if (word_.chars.empty()) word_.start = offset;
    word_.chars.push_back(shown);
    word_.typed.push_back(typed);
}

KeyOutcome InjectionState::on_keystroke_v1(char c, std::size_t offset) {
    const char lower = to_lower(c);
    if (!in_alphabet(lower) || !selects_candidate()) return KeyOutcome{c, std::nullopt};
    const char emitted = match_case(c, config_.model->draw_substitute(lower, rng_));
    return KeyOutcome{emitted, InjectionDecision{offset, c, emitted, InjectionMode::PerKey, true}};
}

char InjectionState::on_keystroke_v2(char c, std::size_t offset) {
    const std::size_t index = word_.chars.size();
    push_char(c, c, offset);
    const char lower = to_lower(c);
    if (in_alphabet(lower) && !is_terminator(lower) && selects_candidate()) {
        const char sub = match_case(c, config_.model->draw_substitute(lower, rng_));
        word_.pending.push_back(PendingSubstitution{index, c, sub});
    }
    return c;
}

std::vector<InjectionDecision> InjectionState::on_backspace_v2() {
    std::vector<InjectionDecision> discarded;
    if (word_.chars.empty()) return discarded;
    word_.chars.pop_back();
    word_.typed.pop_back();
    const std::size_t len = word_.chars.size();
    while (!word_.pending.empty() && word_.pending.back().index >= len) {
        const auto& p = word_.pending.back();
        discarded.push_back(InjectionDecision{word_.start + p.index, p.original, p.substitute,
                                              InjectionMode::PerWord, false});
        word_.pending.pop_back();
    }
    return discarded;
}

CommitOutcome InjectionState::commit_word_v2() {
    CommitOutcome out;
    out.typed = word_.typed;
    out.displayed = word_.chars;
    out.start = word_.start;
    if (word_.chars.empty()) {
        word_ = WordBuffer{};
        return out;
    }

    auto& pending = word_.pending;
    const std::size_t limit = cap(word_.chars.size());
    while (pending.size() > limit) {
        const auto victim = static_cast<std::ptrdiff_t>(rng_.below(pending.size()));
        const auto& p = pending[static_cast<std::size_t>(victim)];
        out.decisions.push_back(InjectionDecision{word_.start + p.index, p.original, p.substitute,
                                                  InjectionMode::PerWord, false});
        pending.erase(pending.begin() + victim);
    }
    for (const auto& p : pending) {
        out.displayed[p.index] = p.substitute;
        out.decisions.push_back(InjectionDecision{word_.start + p.index, p.original, p.substitute,
                                                  InjectionMode::PerWord, true});
    }
    word_ = WordBuffer{};
    return out;
}

KeyOutcome InjectionState::on_key(char c, std::size_t offset) {
    switch (config_.mode) {
        case InjectionMode::PerKey: {
            KeyOutcome k = on_keystroke_v1(c, offset);
            push_char(k.emitted, c, offset);
            return k;
        }
        case InjectionMode::PerWord:
            return KeyOutcome{on_keystroke_v2(c, offset), std::nullopt};
        case InjectionMode::Off:
            break;
    }
    push_char(c, c, offset);
    return KeyOutcome{c, std::nullopt};
}

std::vector<InjectionDecision> InjectionState::on_backspace() {
    if (config_.mode == InjectionMode::PerWord) return on_backspace_v2();
    if (!word_.chars.empty()) {
        word_.chars.pop_back();
        word_.typed.pop_back();
    }
    return {};
}

CommitOutcome InjectionState::commit_word() {
    if (config_.mode == InjectionMode::PerWord) return commit_word_v2();
    CommitOutcome out{word_.typed, word_.chars, word_.start, {}};
    word_ = WordBuffer{};
    return out;
}

}  // namespace keyfault
