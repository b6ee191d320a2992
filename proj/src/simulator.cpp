#include "keyfault/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "keyfault/alphabet.hpp"
#include "keyfault/error.hpp"
#include "keyfault/typing_session.hpp"

namespace keyfault {

namespace {

using nlohmann::json;

Vigilance parse_vigilance(const std::string& s) {
    if (s == "per_char") return Vigilance::PerChar;
    if (s == "at_commit") return Vigilance::AtCommit;
    if (s == "at_submit") return Vigilance::AtSubmit;
    throw Error("unknown vigilance '" + s + "'");
}

Strategy parse_strategy(const std::string& s) {
    if (s == "sequential_backspace") return Strategy::SequentialBackspace;
    if (s == "cursor_reposition") return Strategy::CursorReposition;
    throw Error("unknown strategy '" + s + "'");
}

TypistProfile profile_from_json(const json& j) {
    TypistProfile p;
    p.name = j.value("name", p.name);
    p.interkey_mean_ms = j.value("interkey_mean_ms", p.interkey_mean_ms);
    p.interkey_jitter = j.value("interkey_jitter", p.interkey_jitter);
    p.backspace_mean_ms = j.value("backspace_mean_ms", p.backspace_mean_ms);
    p.natural_error_rate = j.value("natural_error_rate", p.natural_error_rate);
    p.slip_awareness = j.value("slip_awareness", p.slip_awareness);
    if (j.contains("vigilance")) p.vigilance = parse_vigilance(j.at("vigilance").get<std::string>());
    p.detection_prob = j.value("detection_prob", p.detection_prob);
    if (j.contains("strategy")) p.strategy = parse_strategy(j.at("strategy").get<std::string>());
    p.reposition_threshold = j.value("reposition_threshold", p.reposition_threshold);
    p.review_ms = j.value("review_ms", p.review_ms);
    p.cursor_move_ms = j.value("cursor_move_ms", p.cursor_move_ms);
    p.submit_ms = j.value("submit_ms", p.submit_ms);
    p.validate();
    return p;
}

// Drives one typist through one phrase task inside a session.
class Typist {
public:
    Typist(const TypistProfile& profile, const InjectionModel& model, TypingSession& session,
           Rng& rng, std::int64_t& clock)
        : p_(profile), model_(model), s_(session), rng_(rng), t_(clock) {}

    void type_phrase(const std::string& phrase) {
        target_ = phrase;
        accepted_.assign(target_.size(), 0);
        budget_ = 10 * target_.size() + 50;

        t_ += gap(p_.interkey_mean_ms);
        do {
            type_remaining(p_.vigilance);
        } while (p_.vigilance != Vigilance::AtSubmit && review_leftmost());
        if (p_.vigilance == Vigilance::AtSubmit) review_right_to_left();
        if (s_.cursor() != s_.text().size()) move_cursor(s_.text().size());
        t_ += gap(p_.submit_ms);
        s_.submit(t_);
    }

private:
    std::int64_t gap(double mean_ms) {
        return std::max<std::int64_t>(1, std::llround(rng_.lognormal(mean_ms, p_.interkey_jitter)));
    }

    void type_char(char intended) {
        char c = intended;
        bool slip = false;
        const char lower = to_lower(intended);
        if (in_alphabet(lower) && rng_.uniform() < p_.natural_error_rate) {
            const char sub = model_.draw_substitute(lower, rng_);
            c = is_upper(intended) ? to_upper(sub) : sub;
            slip = c != intended;
        }
        s_.key(t_, c, slip);
        t_ += gap(p_.interkey_mean_ms);
        if (slip && rng_.uniform() < p_.slip_awareness) {
            backspace();
            type_char(intended);
        }
    }

    void backspace() {
        s_.backspace(t_);
        t_ += gap(p_.backspace_mean_ms);
    }

    void move_cursor(std::size_t index) {
        t_ += gap(p_.cursor_move_ms);
        s_.move_cursor(t_, index);
    }

    // Positions where the screen disagrees with the intent and the typist
    // has not already let the difference stand.
    std::vector<std::size_t> mismatches() const {
        std::vector<std::size_t> out;
        const std::string& text = s_.text();
        const std::size_t n = std::min(text.size(), target_.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (text[i] != target_[i] && accepted_[i] != text[i]) out.push_back(i);
        }
        return out;
    }

    bool detects() { return rng_.uniform() < p_.detection_prob; }

    void type_remaining(Vigilance vigilance) {
        while (s_.text().size() < target_.size()) {
            if (s_.cursor() != s_.text().size()) move_cursor(s_.text().size());
            const char intended = target_[s_.text().size()];
            type_char(intended);
            if (vigilance == Vigilance::PerChar ||
                (vigilance == Vigilance::AtCommit && is_terminator(intended))) {
                review_leftmost();
            }
        }
    }

    // Fixes the leftmost noticed error; false when nothing was fixed.
    bool review_leftmost() {
        for (std::size_t pos : mismatches()) {
            if (budget_ == 0) return false;
            if (!detects()) {
                accepted_[pos] = s_.text()[pos];
                continue;
            }
            fix(pos);
            return true;
        }
        return false;
    }

    void review_right_to_left() {
        auto found = mismatches();
        std::vector<std::size_t> detected;
        for (auto it = found.rbegin(); it != found.rend(); ++it) {
            if (detects()) {
                detected.push_back(*it);
            } else {
                accepted_[*it] = s_.text()[*it];
            }
        }
        // Backspacing to the leftmost error also clears everything after it.
        if (p_.strategy == Strategy::SequentialBackspace && detected.size() > 1) {
            detected.erase(detected.begin(), detected.end() - 1);
        }
        for (std::size_t pos : detected) {
            if (budget_ == 0) return;
            if (pos >= s_.text().size() || s_.text()[pos] == target_[pos]) continue;
            fix(pos);
            // Text behind a backspaced error has to be typed again.
            type_remaining(Vigilance::AtSubmit);
        }
    }

    void fix(std::size_t pos) {
        --budget_;
        t_ += gap(p_.review_ms);
        const std::size_t end = s_.text().size();
        if (s_.cursor() != end) move_cursor(end);
        const CorrectionAction action = correction_action(p_, pos, end, &rng_);
        if (action.kind == CorrectionAction::Kind::Backspace) {
            for (std::size_t i = 0; i < action.backspaces; ++i) backspace();
            std::fill(accepted_.begin() + static_cast<std::ptrdiff_t>(pos), accepted_.end(), 0);
            return;
        }
        move_cursor(action.move_to);
        for (std::size_t i = 0; i < action.backspaces; ++i) backspace();
        const std::size_t from = action.move_to - action.backspaces;
        for (std::size_t i = from; i < action.move_to; ++i) {
            accepted_[i] = 0;
            type_char(target_[i]);
        }
        move_cursor(s_.text().size());
    }

    const TypistProfile& p_;
    const InjectionModel& model_;
    TypingSession& s_;
    Rng& rng_;
    std::int64_t& t_;
    std::string target_;
    std::vector<char> accepted_;
    std::size_t budget_ = 0;
};

}  // namespace

const char* to_string(Vigilance v) {
    switch (v) {
        case Vigilance::PerChar: return "per_char";
        case Vigilance::AtCommit: return "at_commit";
        case Vigilance::AtSubmit: return "at_submit";
    }
    return "at_commit";
}

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::SequentialBackspace: return "sequential_backspace";
        case Strategy::CursorReposition: return "cursor_reposition";
    }
    return "sequential_backspace";
}

void TypistProfile::validate() const {
    auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!prob(natural_error_rate) || !prob(detection_prob) || !prob(slip_awareness)) {
        throw Error("typist probabilities must lie in [0, 1]");
    }
    if (!(interkey_mean_ms > 0.0) || !(backspace_mean_ms > 0.0) || !(review_ms > 0.0) ||
        !(cursor_move_ms > 0.0) || !(submit_ms > 0.0) || interkey_jitter < 0.0) {
        throw Error("typist times must be positive");
    }
}

TypistProfile parse_profile(const std::string& json_text) {
    try {
        return profile_from_json(json::parse(json_text));
    } catch (const json::exception& e) {
        throw Error(std::string("bad profile: ") + e.what());
    }
}

std::string profile_to_json(const TypistProfile& p) {
    return json{{"name", p.name},
                {"interkey_mean_ms", p.interkey_mean_ms},
                {"interkey_jitter", p.interkey_jitter},
                {"backspace_mean_ms", p.backspace_mean_ms},
                {"natural_error_rate", p.natural_error_rate},
                {"slip_awareness", p.slip_awareness},
                {"vigilance", to_string(p.vigilance)},
                {"detection_prob", p.detection_prob},
                {"strategy", to_string(p.strategy)},
                {"reposition_threshold", p.reposition_threshold},
                {"review_ms", p.review_ms},
                {"cursor_move_ms", p.cursor_move_ms},
                {"submit_ms", p.submit_ms}}
        .dump();
}

CorrectionAction correction_action(const TypistProfile& profile, std::size_t error_offset,
                                   std::size_t cursor_offset, Rng* rng) {
    const std::size_t distance = cursor_offset - error_offset;
    if (profile.strategy == Strategy::SequentialBackspace ||
        distance <= profile.reposition_threshold) {
        return CorrectionAction{CorrectionAction::Kind::Backspace, distance, 0};
    }
    std::size_t overshoot = 1;
    if (rng && error_offset + 2 <= cursor_offset && rng->uniform() < 0.5) overshoot = 2;
    return CorrectionAction{CorrectionAction::Kind::MoveThenFix, overshoot, error_offset + overshoot};
}

SessionLog simulate_session(const TypistProfile& profile, const std::vector<std::string>& phrases,
                            const InjectionConfig& config, std::uint64_t seed, SessionHeader header) {
    profile.validate();
    if (!config.model) throw Error("simulation needs an injection model");
    if (header.session_id.empty()) header.session_id = "sim-" + std::to_string(seed);

    InjectionConfig cfg = config;
    cfg.seed = derive_seed(seed, {0});
    TypingSession session(cfg, header);
    Rng rng(derive_seed(seed, {1}));
    std::int64_t clock = 0;
    for (std::size_t i = 0; i < phrases.size(); ++i) {
        if (phrases[i].empty()) throw Error("cannot simulate an empty phrase");
        session.show_phrase(clock, phrases[i], derive_seed(seed, {2, i}));
        Typist typist(profile, *cfg.model, session, rng, clock);
        typist.type_phrase(phrases[i]);
        clock += 2000;
    }
    return session.log();
}

SessionLog simulate_phrase(const TypistProfile& profile, const std::string& phrase,
                           const InjectionConfig& config, std::uint64_t seed) {
    return simulate_session(profile, {phrase}, config, seed);
}

std::vector<ExperimentRow> run_experiment(const std::vector<SimulatedTypist>& typists,
                                          const std::vector<PhraseSet>& phrase_sets,
                                          const InjectionConfig& injection,
                                          const Dictionary& dictionary, std::uint64_t seed) {
    if (typists.empty()) throw Error("experiment needs at least one typist");
    if (phrase_sets.size() < kConditions.size()) throw Error("experiment needs four phrase sets");

    std::vector<ExperimentRow> rows;
    for (const auto& typist : typists) {
        const StudyPlan plan = make_plan(typist.participant, seed);
        for (Condition c : kConditions) {
            InjectionConfig cfg = injection;
            if (!injected(c)) cfg.mode = InjectionMode::Off;
            SessionHeader header;
            header.session_id = "p" + std::to_string(typist.participant) + "-" + to_string(c);
            header.condition = to_string(c);
            const auto& phrases = phrase_sets.at(plan.phrase_set[index_of(c)]).phrases;
            SessionLog log = simulate_session(
                typist.profile, phrases, cfg,
                derive_seed(seed, {typist.participant, index_of(c) + 1}), header);
            MetricsReport report = session_report(log, dictionary);
            rows.push_back(ExperimentRow{typist.participant, typist.profile.name, c,
                                         std::move(report), std::move(log)});
        }
    }
    return rows;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest " + path.string());
    Manifest m;
    try {
        const json j = json::parse(in);
        m.seed = j.value("seed", std::uint64_t{0});
        std::filesystem::path phrases = j.at("phrases").get<std::string>();
        m.phrases = phrases.is_absolute() ? phrases : path.parent_path() / phrases;
        m.sets = j.value("sets", m.sets);
        m.set_size = j.value("set_size", m.set_size);
        if (j.contains("injection")) {
            const auto& inj = j.at("injection");
            m.mode = parse_mode(inj.value("mode", std::string("word")));
            m.p_t = inj.value("pt", m.p_t);
        }
        std::size_t participant = 0;
        for (const auto& entry : j.at("typists")) {
            const TypistProfile profile = profile_from_json(entry.at("profile"));
            const std::size_t count = entry.value("count", std::size_t{1});
            for (std::size_t i = 0; i < count; ++i) m.typists.push_back({profile, participant++});
        }
    } catch (const json::exception& e) {
        throw Error("bad manifest " + path.string() + ": " + e.what());
    }
    if (m.typists.empty()) throw Error("manifest lists no typists");
    return m;
}

}  // namespace keyfault
