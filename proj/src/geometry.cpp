#include "keyfault/geometry.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "keyfault/alphabet.hpp"
#include "keyfault/error.hpp"

namespace keyfault {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        if (i >= line.size()) break;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

double parse_number(std::string_view field, std::size_t line_no) {
    double value = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
        throw ParseError(line_no, "bad number '" + std::string(field) + "'");
    }
    return value;
}

char parse_key_token(std::string_view token, std::size_t line_no) {
    if (token == "SPACE") return ' ';
    if (token == "PERIOD") return '.';
    if (token == "COMMA") return ',';
    if (token.size() == 1) return token[0];
    throw ParseError(line_no, "unknown key token '" + std::string(token) + "'");
}

}  // namespace

KeyboardLayout::KeyboardLayout(std::map<char, KeyGeom> keys, char standard_key)
    : keys_(std::move(keys)), standard_key_(standard_key) {
    for (char c : kAlphabet) {
        if (!contains(c)) throw MissingKey(c);
    }
    const KeyGeom& ref = key(standard_key_);
    unit_k_ = (ref.w + ref.h) / 2.0;
}

const KeyGeom& KeyboardLayout::key(char c) const {
    auto it = keys_.find(c);
    if (it == keys_.end()) throw MissingKey(c);
    return it->second;
}

double KeyboardLayout::raw_distance(char a, char b) const {
    const KeyGeom& ka = key(a);
    const KeyGeom& kb = key(b);
    return std::hypot(ka.cx - kb.cx, ka.cy - kb.cy) / unit_k_;
}

KeyboardLayout load_layout(std::string_view spec_text) {
    std::map<char, KeyGeom> keys;
    std::set<std::pair<double, double>> letter_centroids;
    char standard = 'a';
    std::size_t line_no = 0;

    while (!spec_text.empty()) {
        const std::size_t nl = spec_text.find('\n');
        std::string_view line = spec_text.substr(0, nl);
        spec_text = nl == std::string_view::npos ? std::string_view{} : spec_text.substr(nl + 1);
        ++line_no;

        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const auto fields = split_fields(line);
        if (fields.empty()) continue;

        if (fields[0] == "standard") {
            if (fields.size() != 2) throw ParseError(line_no, "expected 'standard <key>'");
            standard = parse_key_token(fields[1], line_no);
            continue;
        }
        if (fields.size() != 5) throw ParseError(line_no, "expected '<key> <cx> <cy> <w> <h>'");

        const char c = parse_key_token(fields[0], line_no);
        KeyGeom g{parse_number(fields[1], line_no), parse_number(fields[2], line_no),
                  parse_number(fields[3], line_no), parse_number(fields[4], line_no)};
        if (g.w <= 0.0 || g.h <= 0.0) throw ParseError(line_no, "key size must be positive");
        if (keys.count(c)) throw ParseError(line_no, "duplicate key");
        if (c >= 'a' && c <= 'z' && !letter_centroids.emplace(g.cx, g.cy).second) {
            throw ParseError(line_no, "two letter keys share a centroid");
        }
        keys.emplace(c, g);
    }
    if (!keys.count(standard)) throw MissingKey(standard);
    return KeyboardLayout(std::move(keys), standard);
}

KeyboardLayout load_layout_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open layout file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_layout(buf.str());
}

double key_distance(const KeyboardLayout& layout, char a, char b) {
    return std::max(layout.raw_distance(a, b), 1.0);
}

std::vector<char> neighbor_set(const KeyboardLayout& layout, char c) {
    layout.key(c);
    std::vector<char> out;
    for (char m : kAlphabet) {
        if (m == c || layout.raw_distance(c, m) <= kNeighbourRadius) out.push_back(m);
    }
    return out;
}

}  // namespace keyfault
