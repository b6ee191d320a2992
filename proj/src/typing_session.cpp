#include "keyfault/typing_session.hpp"

#include "keyfault/alphabet.hpp"
#include "keyfault/error.hpp"

namespace keyfault {

TypingSession::TypingSession(InjectionConfig config, SessionHeader header)
    : state_(std::move(config)), log_{std::move(header), {}} {
    log_.header.mode = state_.config().mode;
    log_.header.p_t = state_.config().p_t;
    log_.header.seed = state_.config().seed;
    if (state_.config().model && log_.header.config_digest.empty()) {
        log_.header.config_digest = state_.config().model->digest();
    }
}

void TypingSession::stamp(std::int64_t t) {
    if (t < last_t_) throw StreamError(log_.events.size(), "timestamp decreased");
    last_t_ = t;
}

void TypingSession::append(std::int64_t t, EventKind kind) {
    log_.events.push_back(SessionEvent{t, received_, std::move(kind)});
}

void TypingSession::insert(char c) {
    text_.insert(text_.begin() + static_cast<std::ptrdiff_t>(cursor_), c);
    ++cursor_;
}

void TypingSession::commit(std::int64_t t) {
    if (state_.word().empty()) return;
    CommitOutcome out = state_.commit_word();
    for (const auto& d : out.decisions) {
        if (d.applied) text_[d.offset] = d.emitted;
        append(t, event::Decision{d});
    }
    append(t, event::WordCommit{out.typed, out.displayed, out.start});
    last_commit_ = std::move(out);
}

void TypingSession::show_phrase(std::int64_t t, const std::string& phrase,
                                std::optional<std::uint64_t> seed) {
    stamp(t);
    last_commit_.reset();
    if (seed) {
        InjectionConfig cfg = state_.config();
        cfg.seed = *seed;
        state_ = InjectionState(std::move(cfg));
    } else {
        state_.reset_word();
    }
    text_.clear();
    cursor_ = 0;
    append(t, event::PhraseShown{phrase});
}

char TypingSession::key(std::int64_t t, char c, bool slip, bool physical) {
    stamp(t);
    last_commit_.reset();
    if (is_terminator(c)) {
        commit(t);
        append(t, event::KeyDown{c, slip, physical});
        const std::size_t offset = cursor_;
        char emitted = c;
        if (state_.config().mode == InjectionMode::PerKey) {
            KeyOutcome k = state_.on_keystroke_v1(c, offset);
            emitted = k.emitted;
            insert(emitted);
            if (k.decision) append(t, event::Decision{*k.decision});
        } else {
            insert(c);
        }
        return emitted;
    }

    append(t, event::KeyDown{c, slip, physical});
    KeyOutcome k = state_.on_key(c, cursor_);
    insert(k.emitted);
    if (k.decision) append(t, event::Decision{*k.decision});
    return k.emitted;
}

void TypingSession::backspace(std::int64_t t) {
    stamp(t);
    last_commit_.reset();
    append(t, event::Backspace{});
    if (cursor_ == 0) return;
    if (!state_.word().empty()) {
        for (const auto& d : state_.on_backspace()) append(t, event::Decision{d});
    }
    text_.erase(cursor_ - 1, 1);
    --cursor_;
}

void TypingSession::move_cursor(std::int64_t t, std::size_t index) {
    stamp(t);
    if (index > text_.size()) throw StreamError(log_.events.size(), "cursor index past end of text");
    last_commit_.reset();
    commit(t);
    append(t, event::CursorMove{index});
    cursor_ = index;
}

void TypingSession::pick_suggestion(std::int64_t t, std::size_t start, std::size_t length,
                                    const std::string& word) {
    stamp(t);
    if (start > text_.size() || length > text_.size() - start) {
        throw StreamError(log_.events.size(), "suggestion span outside text");
    }
    last_commit_.reset();
    commit(t);
    append(t, event::SuggestionPick{word, start, length});
    text_.replace(start, length, word);
    cursor_ = start + word.size();
}

const std::string& TypingSession::submit(std::int64_t t) {
    stamp(t);
    last_commit_.reset();
    commit(t);
    append(t, event::Submit{text_});
    return text_;
}

std::vector<InjectionDecision> TypingSession::decisions() const {
    std::vector<InjectionDecision> out;
    for (const auto& ev : log_.events) {
        if (const auto* d = std::get_if<event::Decision>(&ev.kind)) out.push_back(d->record);
    }
    return out;
}

StreamResult run_stream(const InjectionConfig& config, const std::vector<SessionEvent>& input_events) {
    TypingSession session(config);
    for (std::size_t i = 0; i < input_events.size(); ++i) {
        const SessionEvent& ev = input_events[i];
        try {
            if (const auto* k = std::get_if<event::KeyDown>(&ev.kind)) {
                session.key(ev.t_ms, k->ch, k->slip, k->physical);
            } else if (std::holds_alternative<event::Backspace>(ev.kind)) {
                session.backspace(ev.t_ms);
            } else if (const auto* m = std::get_if<event::CursorMove>(&ev.kind)) {
                session.move_cursor(ev.t_ms, m->index);
            } else if (const auto* p = std::get_if<event::SuggestionPick>(&ev.kind)) {
                session.pick_suggestion(ev.t_ms, p->start, p->length, p->word);
            } else if (const auto* s = std::get_if<event::PhraseShown>(&ev.kind)) {
                session.show_phrase(ev.t_ms, s->text);
            } else if (std::holds_alternative<event::Submit>(ev.kind)) {
                session.submit(ev.t_ms);
            } else {
                throw StreamError(i, "not a user action");
            }
        } catch (const StreamError& e) {
            if (e.offset() == i) throw;
            throw StreamError(i, e.what());
        }
    }
    StreamResult out;
    out.output_text = session.text();
    out.decisions = session.decisions();
    out.log = session.log();
    return out;
}

}  // namespace keyfault
