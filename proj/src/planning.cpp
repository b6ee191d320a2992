#include "keyfault/planning.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "keyfault/error.hpp"
#include "keyfault/rng.hpp"

namespace keyfault {

namespace {

constexpr int kPartitionAttempts = 200;
constexpr std::uint64_t kPhraseSetStream = 0x9e75;

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

const char* to_string(Condition c) {
    switch (c) {
        case Condition::C1: return "C1";
        case Condition::C2: return "C2";
        case Condition::C3: return "C3";
        case Condition::C4: return "C4";
    }
    return "C1";
}

Condition parse_condition(std::string_view text) {
    for (Condition c : kConditions)
        if (text == to_string(c)) return c;
    throw Error("unknown condition '" + std::string(text) + "'");
}

double PhraseSet::mean_length() const {
    if (phrases.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& p : phrases) sum += static_cast<double>(p.size());
    return sum / static_cast<double>(phrases.size());
}

std::vector<std::string> parse_phrases(std::string_view text) {
    std::vector<std::string> out;
    while (!text.empty()) {
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
        while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
        if (line.empty() || line.front() == '#') continue;
        out.emplace_back(line);
    }
    return out;
}

std::vector<std::string> load_phrases(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open phrase file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_phrases(buf.str());
}

std::vector<PhraseSet> partition_phrases(const std::vector<std::string>& pool, std::size_t k,
                                         std::size_t set_size, std::uint64_t seed,
                                         double tolerance) {
    const std::size_t need = k * set_size;
    if (k == 0 || set_size == 0 || pool.size() < need) throw InsufficientPhrases(pool.size(), need);

    Rng rng(seed);
    std::vector<std::size_t> idx(pool.size());
    for (int attempt = 0; attempt < kPartitionAttempts; ++attempt) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        shuffle(idx, rng);
        std::vector<std::size_t> chosen(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(need));
        std::stable_sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
            return pool[a].size() > pool[b].size();
        });

        std::vector<PhraseSet> sets(k);
        std::vector<std::size_t> totals(k, 0);
        for (std::size_t s = 0; s < k; ++s) sets[s].id = s;
        for (std::size_t i : chosen) {
            std::size_t best = k;
            for (std::size_t s = 0; s < k; ++s) {
                if (sets[s].phrases.size() == set_size) continue;
                if (best == k || totals[s] < totals[best]) best = s;
            }
            sets[best].phrases.push_back(pool[i]);
            totals[best] += pool[i].size();
        }

        double lo = sets[0].mean_length();
        double hi = lo;
        for (const auto& s : sets) {
            lo = std::min(lo, s.mean_length());
            hi = std::max(hi, s.mean_length());
        }
        if (hi - lo <= tolerance) return sets;
    }
    throw PartitionFailed();
}

std::array<Condition, 4> latin_square_row(std::size_t row) {
    // Williams design: each condition once per position and each ordered
    // pair of neighbours once across the four rows.
    static constexpr std::array<std::array<Condition, 4>, 4> square = {{
        {Condition::C1, Condition::C2, Condition::C4, Condition::C3},
        {Condition::C2, Condition::C3, Condition::C1, Condition::C4},
        {Condition::C3, Condition::C4, Condition::C2, Condition::C1},
        {Condition::C4, Condition::C1, Condition::C3, Condition::C2},
    }};
    return square[row % 4];
}

StudyPlan make_plan(std::size_t participant_index, std::uint64_t seed) {
    StudyPlan plan;
    plan.participant = participant_index;
    plan.order = latin_square_row(participant_index);
    Rng rng(derive_seed(seed, {kPhraseSetStream, participant_index}));
    std::vector<std::size_t> sets = {0, 1, 2, 3};
    shuffle(sets, rng);
    std::copy(sets.begin(), sets.end(), plan.phrase_set.begin());
    return plan;
}

std::string plan_to_json(const StudyPlan& plan) {
    nlohmann::json order = nlohmann::json::array();
    for (Condition c : plan.order) order.push_back(to_string(c));
    nlohmann::json sets = nlohmann::json::object();
    for (Condition c : kConditions) sets[to_string(c)] = plan.phrase_set[index_of(c)];
    return nlohmann::json{{"participant", plan.participant}, {"order", order}, {"phrase_sets", sets}}
        .dump();
}

}  // namespace keyfault
