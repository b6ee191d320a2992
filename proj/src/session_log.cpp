#include "keyfault/session_log.hpp"

#include <fstream>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "keyfault/error.hpp"

namespace keyfault {

// Insertion order keeps "t" and "kind" at the front of every record.
using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kSchema = "keyfault-log";

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Printable ASCII travels as a one-character string, anything else as its byte value.
json char_to_json(char c) {
    const auto u = static_cast<unsigned char>(c);
    if (u >= 0x20 && u < 0x7f) return std::string(1, c);
    return static_cast<int>(u);
}

char char_from_json(const json& j) {
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s.size() != 1) throw std::invalid_argument("expected a single character");
        return s[0];
    }
    const int v = j.get<int>();
    if (v < 0 || v > 255) throw std::invalid_argument("character code out of range");
    return static_cast<char>(static_cast<unsigned char>(v));
}

json decision_to_json(const InjectionDecision& d) {
    return json{{"offset", d.offset},
                {"original", char_to_json(d.original)},
                {"emitted", char_to_json(d.emitted)},
                {"mode", to_string(d.mode)},
                {"applied", d.applied}};
}

InjectionDecision decision_from_json(const json& j) {
    InjectionDecision d;
    d.offset = j.at("offset").get<std::size_t>();
    d.original = char_from_json(j.at("original"));
    d.emitted = char_from_json(j.at("emitted"));
    d.mode = parse_mode(j.at("mode").get<std::string>());
    d.applied = j.at("applied").get<bool>();
    return d;
}

json event_to_json(const SessionEvent& ev) {
    json j;
    j["t"] = ev.t_ms;
    if (ev.received_ms) j["rt"] = *ev.received_ms;
    std::visit(overloaded{
                   [&](const event::KeyDown& e) {
                       j["kind"] = "key";
                       j["ch"] = char_to_json(e.ch);
                       if (e.slip) j["slip"] = true;
                       if (e.physical) j["physical"] = true;
                   },
                   [&](const event::Backspace&) { j["kind"] = "backspace"; },
                   [&](const event::CursorMove& e) {
                       j["kind"] = "cursor";
                       j["index"] = e.index;
                   },
                   [&](const event::SuggestionPick& e) {
                       j["kind"] = "pick";
                       j["word"] = e.word;
                       j["start"] = e.start;
                       j["length"] = e.length;
                   },
                   [&](const event::WordCommit& e) {
                       j["kind"] = "commit";
                       j["typed"] = e.typed;
                       j["displayed"] = e.displayed;
                       j["start"] = e.start;
                   },
                   [&](const event::Decision& e) {
                       j["kind"] = "decision";
                       j["decision"] = decision_to_json(e.record);
                   },
                   [&](const event::PhraseShown& e) {
                       j["kind"] = "phrase";
                       j["text"] = e.text;
                   },
                   [&](const event::Submit& e) {
                       j["kind"] = "submit";
                       j["text"] = e.final_text;
                   },
               },
               ev.kind);
    return j;
}

SessionEvent event_from_json(const json& j) {
    SessionEvent ev;
    ev.t_ms = j.at("t").get<std::int64_t>();
    if (auto it = j.find("rt"); it != j.end()) ev.received_ms = it->get<std::int64_t>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "key") {
        event::KeyDown k;
        k.ch = char_from_json(j.at("ch"));
        k.slip = j.value("slip", false);
        k.physical = j.value("physical", false);
        ev.kind = k;
    } else if (kind == "backspace") {
        ev.kind = event::Backspace{};
    } else if (kind == "cursor") {
        ev.kind = event::CursorMove{j.at("index").get<std::size_t>()};
    } else if (kind == "pick") {
        ev.kind = event::SuggestionPick{j.at("word").get<std::string>(),
                                        j.at("start").get<std::size_t>(),
                                        j.at("length").get<std::size_t>()};
    } else if (kind == "commit") {
        ev.kind = event::WordCommit{j.at("typed").get<std::string>(),
                                    j.at("displayed").get<std::string>(),
                                    j.at("start").get<std::size_t>()};
    } else if (kind == "decision") {
        ev.kind = event::Decision{decision_from_json(j.at("decision"))};
    } else if (kind == "phrase") {
        ev.kind = event::PhraseShown{j.at("text").get<std::string>()};
    } else if (kind == "submit") {
        ev.kind = event::Submit{j.at("text").get<std::string>()};
    } else {
        throw std::invalid_argument("unknown event kind '" + kind + "'");
    }
    return ev;
}

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

}  // namespace

const char* to_string(InjectionMode mode) {
    switch (mode) {
        case InjectionMode::Off: return "off";
        case InjectionMode::PerKey: return "key";
        case InjectionMode::PerWord: return "word";
    }
    return "off";
}

InjectionMode parse_mode(const std::string& text) {
    if (text == "off") return InjectionMode::Off;
    if (text == "key" || text == "perkey") return InjectionMode::PerKey;
    if (text == "word" || text == "perword") return InjectionMode::PerWord;
    throw Error("unknown injection mode '" + text + "'");
}

std::string serialize_event(const SessionEvent& ev) { return dump(event_to_json(ev)); }

std::string serialize_log(const SessionLog& log) {
    const auto& h = log.header;
    json header{{"schema", kSchema},      {"version", h.schema_version},
                {"session", h.session_id}, {"seed", h.seed},
                {"mode", to_string(h.mode)}, {"pt", h.p_t},
                {"condition", h.condition}, {"digest", h.config_digest}};
    std::string out = dump(header);
    out += '\n';
    for (const auto& ev : log.events) {
        out += serialize_event(ev);
        out += '\n';
    }
    return out;
}

SessionLog parse_log(std::string_view text) {
    SessionLog log;
    std::size_t line_no = 0;
    bool have_header = false;
    while (!text.empty()) {
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            if (!have_header) {
                if (j.at("schema").get<std::string>() != kSchema) {
                    throw std::invalid_argument("not a keyfault log");
                }
                auto& h = log.header;
                h.schema_version = j.at("version").get<int>();
                if (h.schema_version != 1) throw std::invalid_argument("unsupported schema version");
                h.session_id = j.value("session", "");
                h.seed = j.value("seed", std::uint64_t{0});
                h.mode = parse_mode(j.value("mode", "off"));
                h.p_t = j.value("pt", 0.0);
                h.condition = j.value("condition", "");
                h.config_digest = j.value("digest", "");
                have_header = true;
            } else {
                log.events.push_back(event_from_json(j));
            }
        } catch (const std::exception& e) {
            throw ParseError(line_no, e.what());
        }
    }
    if (!have_header) throw ParseError(line_no == 0 ? 1 : line_no, "missing header record");
    return log;
}

SessionLog read_log_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open log file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_log(buf.str());
}

void write_log_file(const std::filesystem::path& path, const SessionLog& log) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write log file " + path.string());
    out << serialize_log(log);
    out.flush();
    if (!out) throw Error("write failed for " + path.string());
}

bool TextReplay::apply(const SessionEvent& ev) {
    return std::visit(
        overloaded{
            [&](const event::KeyDown& e) {
                text_.insert(text_.begin() + static_cast<std::ptrdiff_t>(cursor_), e.ch);
                ++cursor_;
                return true;
            },
            [&](const event::Backspace&) {
                if (cursor_ == 0) return true;
                text_.erase(cursor_ - 1, 1);
                --cursor_;
                return true;
            },
            [&](const event::CursorMove& e) {
                if (e.index > text_.size()) return false;
                cursor_ = e.index;
                return true;
            },
            [&](const event::SuggestionPick& e) {
                if (e.start > text_.size() || e.length > text_.size() - e.start) return false;
                text_.replace(e.start, e.length, e.word);
                cursor_ = e.start + e.word.size();
                return true;
            },
            [&](const event::WordCommit&) { return true; },
            [&](const event::Decision& e) {
                if (!e.record.applied) return true;
                if (e.record.offset >= text_.size()) return false;
                text_[e.record.offset] = e.record.emitted;
                return true;
            },
            [&](const event::PhraseShown&) {
                text_.clear();
                cursor_ = 0;
                return true;
            },
            [&](const event::Submit&) { return true; },
        },
        ev.kind);
}

std::string replay_text(const std::vector<SessionEvent>& events) {
    TextReplay replay;
    for (const auto& ev : events) replay.apply(ev);
    return replay.text();
}

const std::string* PhraseTask::submitted() const {
    for (auto it = events.rbegin(); it != events.rend(); ++it) {
        if (const auto* s = std::get_if<event::Submit>(&it->kind)) return &s->final_text;
    }
    return nullptr;
}

std::vector<PhraseTask> split_tasks(const std::vector<SessionEvent>& events) {
    std::vector<PhraseTask> tasks;
    for (const auto& ev : events) {
        if (const auto* p = std::get_if<event::PhraseShown>(&ev.kind)) {
            tasks.push_back(PhraseTask{p->text, {}});
        } else if (tasks.empty()) {
            tasks.emplace_back();
        }
        tasks.back().events.push_back(ev);
    }
    return tasks;
}

}  // namespace keyfault
