#include "keyfault/dictionary.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "keyfault/alphabet.hpp"
#include "keyfault/error.hpp"

namespace keyfault {

Dictionary Dictionary::parse(std::string_view text) {
    Dictionary d;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.remove_suffix(1);
        while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
        if (line.empty() || line.front() == '#') continue;

        const std::size_t sp = line.find_first_of(" \t");
        std::string word(line.substr(0, sp));
        std::uint64_t freq = 1;
        if (sp != std::string_view::npos) {
            std::string_view rest = line.substr(sp);
            while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t')) rest.remove_prefix(1);
            auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), freq);
            if (ec != std::errc() || ptr != rest.data() + rest.size()) {
                throw ParseError(line_no, "bad frequency");
            }
        }
        for (auto& ch : word) ch = to_lower(ch);
        d.add(std::move(word), freq);
    }
    return d;
}

Dictionary Dictionary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dictionary " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void Dictionary::add(std::string word, std::uint64_t frequency) {
    auto [it, inserted] = freq_.emplace(word, frequency);
    if (inserted) {
        order_.push_back(std::move(word));
    } else {
        it->second += frequency;
    }
}

bool Dictionary::contains(std::string_view word) const {
    return freq_.find(std::string(word)) != freq_.end();
}

std::uint64_t Dictionary::frequency(std::string_view word) const {
    auto it = freq_.find(std::string(word));
    return it == freq_.end() ? 0 : it->second;
}

void Dictionary::rank(std::vector<std::string>& words) const {
    std::sort(words.begin(), words.end(), [&](const std::string& a, const std::string& b) {
        const auto fa = frequency(a);
        const auto fb = frequency(b);
        if (fa != fb) return fa > fb;
        return a < b;
    });
}

std::vector<std::string> Dictionary::completions(std::string_view prefix, std::size_t limit) const {
    std::vector<std::string> out;
    if (prefix.empty()) return out;
    for (const auto& w : order_) {
        if (w.size() >= prefix.size() && w.compare(0, prefix.size(), prefix) == 0) out.push_back(w);
    }
    rank(out);
    if (out.size() > limit) out.resize(limit);
    return out;
}

}  // namespace keyfault
