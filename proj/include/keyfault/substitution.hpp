#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "keyfault/alphabet.hpp"
#include "keyfault/events.hpp"
#include "keyfault/geometry.hpp"

namespace keyfault {

/// Intended -> typed substitution counts over the 29-character alphabet.
/// Rows are the intended character, columns the substitute actually typed.
class SubstitutionMatrix {
public:
    std::uint64_t count(char intended, char typed) const;
    std::uint64_t at(std::size_t row, std::size_t col) const { return counts_[row][col]; }
    void add(char intended, char typed, std::uint64_t n = 1);
    void merge(const SubstitutionMatrix& other);

    std::uint64_t total() const;
    /// Number of non-zero cells.
    std::size_t nonzero() const;

    bool operator==(const SubstitutionMatrix&) const = default;

private:
    std::array<std::array<std::uint64_t, kAlphabetSize>, kAlphabetSize> counts_{};
};

/// 29 lines of 29 space-separated counts, rows a..z, space, '.', ','.
/// A '#' header line records the alphabet order.
std::string format_matrix(const SubstitutionMatrix& m);
SubstitutionMatrix parse_matrix(std::string_view text);
SubstitutionMatrix load_matrix_file(const std::filesystem::path& path);
void save_matrix_file(const std::filesystem::path& path, const SubstitutionMatrix& m);

/// A character the user deleted and then replaced.
struct SuspectPair {
    char intended = 0;  ///< the replacement typed afterwards
    char typed = 0;     ///< the suspect (leftmost deleted character)
    std::string session_id;
    std::size_t offset = 0;  ///< index of the replacing keystroke in the event stream

    bool operator==(const SuspectPair&) const = default;
};

struct SuspectScan {
    std::vector<SuspectPair> pairs;
    std::size_t malformed = 0;  ///< events skipped because they could not apply
};

/// Applies the suspect-character heuristic to an event stream.
///
/// Each maximal run of backspaces at one cursor position that deletes at
/// least one character yields a pair when the next text edit is a keystroke
/// at the run's final position: (leftmost deleted character, character
/// typed there). Pairs outside the alphabet or with intended == typed are
/// dropped. Letters are folded to lower case.
SuspectScan extract_suspects(const std::vector<SessionEvent>& events,
                             const std::string& session_id = {});
SuspectScan extract_suspects(const SessionLog& log);

struct MatrixBuild {
    SubstitutionMatrix matrix;
    std::size_t skipped = 0;  ///< pairs with a character outside the alphabet
};

MatrixBuild build_matrix(std::span<const SuspectPair> pairs);

struct Candidate {
    char ch = 0;
    std::uint64_t frequency = 0;
    double distance = 1.0;  ///< k units, clamped

    bool operator==(const Candidate&) const = default;
};

/// The adjusted substitute set S' for one origin character.
struct CandidateSet {
    char origin = 0;
    std::vector<Candidate> entries;
    /// Every in-range neighbour had zero frequency; the distribution is uniform.
    bool uniform_fallback = false;
};

/// Builds S' from the raw neighbour set S (origin excluded).
///
/// Neighbours with zero frequency are dropped and the origin joins with a
/// frequency equal to the number dropped. When every neighbour is zero the
/// set falls back to all neighbours with equal weight.
CandidateSet build_candidate_set(char origin, std::span<const Candidate> neighbours);
CandidateSet build_candidate_set(const SubstitutionMatrix& matrix, const KeyboardLayout& layout,
                                 char c);

/// P(i) = p_t * (F(i)/D(i,s)) / sum_n F(n)/D(n,s). Probabilities sum to p_t.
/// Throws EmptyCandidateSet.
std::map<char, double> substitution_distribution(const CandidateSet& cs, double p_t);

}  // namespace keyfault
