#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "keyfault/dictionary.hpp"
#include "keyfault/events.hpp"
#include "keyfault/injection.hpp"
#include "keyfault/metrics.hpp"
#include "keyfault/planning.hpp"
#include "keyfault/rng.hpp"

namespace keyfault {

/// When the typist compares the screen with what they meant to type.
enum class Vigilance { PerChar, AtCommit, AtSubmit };
/// How a detected error behind the cursor gets fixed.
enum class Strategy { SequentialBackspace, CursorReposition };

const char* to_string(Vigilance v);
const char* to_string(Strategy s);

/// Synthetic typist parameters. All times in milliseconds.
struct TypistProfile {
    std::string name = "typist";
    double interkey_mean_ms = 450.0;
    double interkey_jitter = 0.3;  ///< coefficient of variation of key gaps
    double backspace_mean_ms = 220.0;
    double natural_error_rate = 0.08;
    /// Chance the typist feels their own slip and fixes it on the spot,
    /// whatever the vigilance. Injected substitutions are never felt.
    double slip_awareness = 0.8;
    Vigilance vigilance = Vigilance::AtCommit;
    double detection_prob = 0.9;
    Strategy strategy = Strategy::SequentialBackspace;
    std::size_t reposition_threshold = 4;
    double review_ms = 900.0;       ///< pause before starting a correction
    double cursor_move_ms = 1400.0; ///< time to place the cursor by touch
    double submit_ms = 1200.0;      ///< pause before pressing submit

    void validate() const;
    bool operator==(const TypistProfile&) const = default;
};

TypistProfile parse_profile(const std::string& json_text);
std::string profile_to_json(const TypistProfile& p);

struct CorrectionAction {
    enum class Kind { Backspace, MoveThenFix } kind = Kind::Backspace;
    std::size_t backspaces = 0;
    /// MoveThenFix: cursor target; backspaces then cover [target - backspaces, target).
    std::size_t move_to = 0;

    bool operator==(const CorrectionAction&) const = default;
};

/// Chooses how to reach an error at `error_offset` with the cursor at
/// `cursor_offset` (error_offset < cursor_offset). When `rng` is given a
/// MoveThenFix lands one character late half of the time, costing a second
/// backspace.
CorrectionAction correction_action(const TypistProfile& profile, std::size_t error_offset,
                                   std::size_t cursor_offset, Rng* rng = nullptr);

/// Types one phrase as a single task and submits it. `config.model` must be
/// set even with injection off: natural slips are drawn from it.
SessionLog simulate_phrase(const TypistProfile& profile, const std::string& phrase,
                           const InjectionConfig& config, std::uint64_t seed);

/// Types every phrase in turn into one session log.
SessionLog simulate_session(const TypistProfile& profile, const std::vector<std::string>& phrases,
                            const InjectionConfig& config, std::uint64_t seed,
                            SessionHeader header = {});

struct SimulatedTypist {
    TypistProfile profile;
    std::size_t participant = 0;
};

struct ExperimentRow {
    std::size_t participant = 0;
    std::string profile;
    Condition condition = Condition::C1;
    MetricsReport report;
    SessionLog log;
};

/// One session per (typist, condition) following each typist's study plan.
/// `injection` supplies the mode and p_t used in C2/C4 and the model.
/// Rows are ordered by participant, then by condition C1..C4.
std::vector<ExperimentRow> run_experiment(const std::vector<SimulatedTypist>& typists,
                                          const std::vector<PhraseSet>& phrase_sets,
                                          const InjectionConfig& injection,
                                          const Dictionary& dictionary, std::uint64_t seed);

/// Experiment description loaded from JSON:
///
///     {"seed": 7, "phrases": "phrases.txt", "sets": 4, "set_size": 14,
///      "injection": {"mode": "word", "pt": 0.15},
///      "typists": [{"count": 5, "profile": {...}}, ...]}
///
/// Relative paths resolve against the manifest's directory.
struct Manifest {
    std::uint64_t seed = 0;
    std::filesystem::path phrases;
    std::size_t sets = 4;
    std::size_t set_size = 14;
    InjectionMode mode = InjectionMode::PerWord;
    double p_t = 0.15;
    std::vector<SimulatedTypist> typists;
};

Manifest load_manifest(const std::filesystem::path& path);

}  // namespace keyfault
