#include "keyfault/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "keyfault/alphabet.hpp"
#include "keyfault/metrics.hpp"
#include "keyfault/rng.hpp"
#include "keyfault/session_log.hpp"

namespace keyfault {

using nlohmann::json;

namespace {

constexpr std::size_t kPhrasesPerCondition = 14;

void append_durably(const std::filesystem::path& path, const std::string& data) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw Error("cannot open " + path.string() + ": " + std::strerror(errno));
    std::size_t done = 0;
    while (done < data.size()) {
        const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            const int err = errno;
            ::close(fd);
            throw Error("write to " + path.string() + " failed: " + std::strerror(err));
        }
        done += static_cast<std::size_t>(n);
    }
    const bool synced = ::fsync(fd) == 0;
    ::close(fd);
    if (!synced) throw Error("fsync of " + path.string() + " failed");
}

bool safe_file_name(const std::string& name) {
    return !name.empty() && name.find('/') == std::string::npos && name.find("..") == std::string::npos;
}

// Spans of finished words in `text`, i.e. every word except one still being composed.
struct Span {
    std::size_t start;
    std::size_t length;
};

std::vector<Span> finished_words(const std::string& text, std::optional<std::size_t> composing_start) {
    std::vector<Span> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_terminator(text[i])) ++i;
        const std::size_t start = i;
        while (i < text.size() && !is_terminator(text[i])) ++i;
        if (i > start && (!composing_start || start != *composing_start)) out.push_back({start, i - start});
    }
    return out;
}

}  // namespace

struct StudyService::Study {
    StudyConfig config;
};

struct StudyService::Live {
    std::mutex mu;
    std::string id;
    std::shared_ptr<Study> study;
    std::size_t participant = 0;
    StudyPlan plan;
    std::size_t position = 0;      ///< index into plan.order
    std::size_t phrase_index = 0;  ///< within the current condition
    std::optional<TypingSession> typing;
    std::size_t persisted = 0;     ///< events of `typing` already on disk
    std::int64_t last_t = 0;
    std::uint64_t last_seq = 0;
    json last_response = json::array();
    bool done = false;

    Condition condition() const { return plan.order[position]; }
    const std::string& phrase() const {
        return study->config.phrase_sets.at(plan.phrase_set[index_of(condition())]).phrases.at(phrase_index);
    }
};

StudyConfig study_config_from_json(const json& body) {
    StudyConfig c;
    c.id = body.value("id", std::string());
    c.seed = body.value("seed", std::uint64_t{0});
    c.mode = parse_mode(body.value("mode", std::string("word")));
    c.p_t = body.value("pt", 0.15);
    c.autocorrect = body.value("autocorrect", false);
    c.suggestion_count = body.value("suggestions", std::size_t{3});
    if (body.contains("phrase_sets")) {
        std::size_t id = 0;
        for (const auto& set : body.at("phrase_sets")) {
            c.phrase_sets.push_back(PhraseSet{id++, set.get<std::vector<std::string>>()});
        }
    } else {
        const auto pool = body.at("phrases").get<std::vector<std::string>>();
        c.phrase_sets = partition_phrases(pool, 4, body.value("set_size", kPhrasesPerCondition), c.seed);
    }
    return c;
}

StudyService::StudyService(std::shared_ptr<const InjectionModel> model,
                           std::shared_ptr<const Dictionary> dictionary,
                           std::filesystem::path log_root, Clock clock)
    : model_(std::move(model)),
      dictionary_(std::move(dictionary)),
      log_root_(std::move(log_root)),
      clock_(std::move(clock)) {
    if (!model_ || !dictionary_ || dictionary_->empty()) throw Error("service needs a model and dictionary");
    if (!clock_) {
        const auto origin = std::chrono::steady_clock::now();
        clock_ = [origin] {
            return std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - origin)
                .count();
        };
    }
    std::filesystem::create_directories(log_root_);
}

StudyService::~StudyService() = default;

std::string StudyService::create_study(StudyConfig config) {
    if (config.phrase_sets.size() != kConditions.size()) throw Error("a study needs four phrase sets");
    for (const auto& s : config.phrase_sets) {
        if (s.phrases.empty()) throw Error("phrase sets must not be empty");
    }
    if (!(config.p_t >= 0.0 && config.p_t <= 1.0)) throw Error("p_t must lie in [0, 1]");
    std::lock_guard lock(mu_);
    if (config.id.empty()) config.id = "study" + std::to_string(studies_.size() + 1);
    if (!safe_file_name(config.id)) throw Error("invalid study id");
    auto study = std::make_shared<Study>();
    study->config = std::move(config);
    const std::string id = study->config.id;
    studies_[id] = std::move(study);
    std::filesystem::create_directories(log_root_ / id);
    return id;
}

std::shared_ptr<StudyService::Study> StudyService::find_study(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = studies_.find(id);
    if (it == studies_.end()) throw NotFound("unknown study '" + id + "'");
    return it->second;
}

std::shared_ptr<StudyService::Live> StudyService::find_session(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
    return it->second;
}

std::filesystem::path StudyService::log_path(const Study& study, std::size_t participant,
                                             Condition c) const {
    return log_root_ / study.config.id /
           ("p" + std::to_string(participant) + "_" + to_string(c) + ".jsonl");
}

void StudyService::open_condition(Live& live, std::int64_t t) {
    const StudyConfig& cfg = live.study->config;
    const Condition c = live.condition();
    InjectionConfig inj;
    inj.mode = injected(c) ? cfg.mode : InjectionMode::Off;
    inj.p_t = cfg.p_t;
    inj.model = model_;
    inj.seed = derive_seed(cfg.seed, {live.participant, index_of(c)});
    SessionHeader header;
    header.session_id = live.id;
    header.condition = to_string(c);
    live.typing.emplace(inj, header);
    live.typing->set_receive_time(clock_());
    live.persisted = 0;
    live.typing->show_phrase(
        t, live.phrase(), derive_seed(cfg.seed, {live.participant, index_of(c), live.phrase_index}));
}

static std::string session_id_for(const std::string& study, std::size_t participant) {
    return study + "-p" + std::to_string(participant);
}

json StudyService::start_session(const std::string& study_id, std::size_t participant) {
    auto study = find_study(study_id);
    const std::string sid = session_id_for(study_id, participant);
    {
        std::lock_guard lock(mu_);
        if (auto it = sessions_.find(sid); it != sessions_.end()) {
            std::lock_guard live_lock(it->second->mu);
            return state_message(*it->second);
        }
    }

    auto live = std::make_shared<Live>();
    live->id = sid;
    live->study = study;
    live->participant = participant;
    live->plan = make_plan(participant, study->config.seed);

    // Resume after the last persisted submit.
    for (live->position = 0; live->position < kConditions.size(); ++live->position) {
        const auto path = log_path(*study, participant, live->condition());
        std::size_t submitted = 0;
        if (std::filesystem::exists(path)) {
            const SessionLog log = read_log_file(path);
            for (const auto& ev : log.events) {
                if (std::holds_alternative<event::Submit>(ev.kind)) ++submitted;
                live->last_t = std::max(live->last_t, ev.t_ms);
            }
        }
        const auto& set = study->config.phrase_sets.at(live->plan.phrase_set[index_of(live->condition())]);
        if (submitted < set.phrases.size()) {
            live->phrase_index = submitted;
            break;
        }
    }
    if (live->position == kConditions.size()) {
        live->position = kConditions.size() - 1;
        live->done = true;
    } else {
        open_condition(*live, live->last_t);
    }

    std::lock_guard lock(mu_);
    auto [it, inserted] = sessions_.emplace(sid, live);
    std::lock_guard live_lock(it->second->mu);
    return state_message(*it->second);
}

json StudyService::phrase_message(const Live& live) const {
    const auto& set = live.study->config.phrase_sets.at(live.plan.phrase_set[index_of(live.condition())]);
    return json{{"kind", "phrase"},
                {"text", live.phrase()},
                {"index", live.phrase_index},
                {"count", set.phrases.size()},
                {"condition", to_string(live.condition())},
                {"highlighting", highlighting(live.condition())}};
}

json StudyService::state_message(const Live& live) const {
    json out{{"session_id", live.id},
             {"participant", live.participant},
             {"next_seq", live.last_seq + 1},
             {"done", live.done}};
    json order = json::array();
    for (Condition c : live.plan.order) order.push_back(to_string(c));
    out["order"] = order;
    if (!live.done) {
        out["phrase"] = phrase_message(live);
        out["buffer"] = buffer_state(live, live.last_seq);
    }
    return out;
}

json StudyService::buffer_state(const Live& live, std::uint64_t ack) const {
    json msg{{"kind", "buffer_state"}, {"ack", ack}};
    if (!live.typing || live.done) {
        msg["text"] = "";
        msg["cursor"] = 0;
        msg["highlights"] = json::array();
        msg["suggestions"] = json::array();
        return msg;
    }
    const TypingSession& t = *live.typing;
    msg["text"] = t.text();
    msg["cursor"] = t.cursor();

    json spans = json::array();
    if (highlighting(live.condition())) {
        std::optional<std::size_t> composing;
        if (t.composing()) composing = t.injection().word().start;
        for (const Span& s : finished_words(t.text(), composing)) {
            const WordClass wc = classify_word(t.text().substr(s.start, s.length), *dictionary_);
            if (wc.kind == WordClassKind::Correct) continue;
            const char* color = (wc.kind == WordClassKind::Minor && live.study->config.autocorrect)
                                    ? "orange"
                                    : highlight_color(wc.kind);
            spans.push_back(json{{"start", s.start},
                                 {"length", s.length},
                                 {"class", to_string(wc.kind)},
                                 {"color", color},
                                 {"suggestions", wc.suggestions}});
        }
    }
    msg["highlights"] = spans;

    json completions = json::array();
    if (t.composing()) {
        std::string prefix;
        for (char c : t.injection().word().chars) prefix.push_back(to_lower(c));
        completions = dictionary_->completions(prefix, live.study->config.suggestion_count);
    }
    msg["suggestions"] = completions;
    return msg;
}

void StudyService::persist(Live& live, const TypingSession& typing) {
    if (fail_next_write_.exchange(false)) {
        throw Error("simulated write failure");
    }
    const auto path = log_path(*live.study, live.participant, live.condition());
    std::string data;
    if (!std::filesystem::exists(path)) {
        data = serialize_log(SessionLog{typing.log().header, {}});
    }
    const auto& events = typing.log().events;
    for (std::size_t i = live.persisted; i < events.size(); ++i) {
        data += serialize_event(events[i]);
        data += '\n';
    }
    append_durably(path, data);
}

json StudyService::apply(Live& live, const json& message) {
    const std::uint64_t seq = message.at("seq").get<std::uint64_t>();
    const std::int64_t t = std::max(live.last_t, message.value("t", live.last_t));
    const std::string kind = message.at("kind").get<std::string>();
    const json payload = message.value("payload", json::object());

    json out = json::array();
    if (live.done) {
        out.push_back(buffer_state(live, seq));
        out.push_back(json{{"kind", "session_done"}});
        return out;
    }

    TypingSession& typing = *live.typing;
    typing.set_receive_time(clock_());
    std::optional<json> feedback;
    std::optional<json> next;

    if (kind == "key") {
        const std::string ch = payload.at("ch").get<std::string>();
        if (ch.size() != 1) throw Error("key payload must be one character");
        typing.key(t, ch[0], false, payload.value("physical", false));
    } else if (kind == "backspace") {
        typing.backspace(t);
    } else if (kind == "cursor") {
        typing.move_cursor(t, std::min(payload.at("index").get<std::size_t>(), typing.text().size()));
    } else if (kind == "pick_suggestion") {
        typing.pick_suggestion(t, payload.at("start").get<std::size_t>(),
                               payload.at("length").get<std::size_t>(),
                               payload.at("word").get<std::string>());
    } else if (kind == "submit") {
        TypingSession candidate = typing;
        candidate.submit(t);
        persist(live, candidate);  // throws before any state changes
        const std::string final_text = candidate.text();
        const auto commit = candidate.last_commit();
        typing = std::move(candidate);
        live.persisted = typing.log().events.size();
        live.last_t = t;
        if (commit) {
            const WordClass wc = classify_word(commit->displayed, *dictionary_);
            feedback = json{{"kind", "word_feedback"}, {"word", commit->displayed},
                            {"class", to_string(wc.kind)}, {"bar", bar_color(wc.kind)},
                            {"suggestions", wc.suggestions}, {"span", nullptr}};
        }

        const auto& set = live.study->config.phrase_sets.at(live.plan.phrase_set[index_of(live.condition())]);
        ++live.phrase_index;
        if (live.phrase_index < set.phrases.size()) {
            typing.show_phrase(t, live.phrase(),
                               derive_seed(live.study->config.seed,
                                           {live.participant, index_of(live.condition()), live.phrase_index}));
            next = phrase_message(live);
        } else if (live.position + 1 < kConditions.size()) {
            ++live.position;
            live.phrase_index = 0;
            open_condition(live, t);
            next = phrase_message(live);
        } else {
            live.done = true;
            next = json{{"kind", "session_done"}};
        }
        if (next) (*next)["final_text"] = final_text;
    } else {
        throw Error("unknown message kind '" + kind + "'");
    }
    live.last_t = t;

    if (!feedback) {
        if (const auto& commit = typing.last_commit()) {
            const WordClass wc = classify_word(commit->displayed, *dictionary_);
            json span = nullptr;
            if (highlighting(live.condition())) {
                span = json{{"start", commit->start}, {"length", commit->displayed.size()}};
            }
            const char* hl = (wc.kind == WordClassKind::Minor && live.study->config.autocorrect)
                                 ? "orange"
                                 : highlight_color(wc.kind);
            feedback = json{{"kind", "word_feedback"},
                            {"word", commit->displayed},
                            {"class", to_string(wc.kind)},
                            {"bar", bar_color(wc.kind)},
                            {"highlight", highlighting(live.condition()) ? hl : ""},
                            {"suggestions", wc.suggestions},
                            {"span", span}};
        }
    }

    out.push_back(buffer_state(live, seq));
    if (feedback) out.push_back(*feedback);
    if (next) out.push_back(*next);
    return out;
}

json StudyService::handle(const std::string& session_id, const json& message) {
    auto live = find_session(session_id);
    std::lock_guard lock(live->mu);

    const std::uint64_t seq = message.at("seq").get<std::uint64_t>();
    if (seq == live->last_seq && live->last_seq != 0) return live->last_response;
    if (seq != live->last_seq + 1) {
        json resync{{"kind", "resync"}, {"expected_seq", live->last_seq + 1}};
        const json buf = buffer_state(*live, live->last_seq);
        resync["text"] = buf["text"];
        resync["cursor"] = buf["cursor"];
        return json::array({resync});
    }

    json response;
    try {
        response = apply(*live, message);
    } catch (const StreamError& e) {
        response = json::array({buffer_state(*live, seq), json{{"kind", "error"}, {"message", e.what()}}});
    } catch (const json::exception& e) {
        response = json::array({buffer_state(*live, seq), json{{"kind", "error"}, {"message", e.what()}}});
    } catch (const Error& e) {
        // Nothing was applied; the client may retry with the same sequence number.
        return json::array({json{{"kind", "error"}, {"message", e.what()}, {"paused", true},
                                 {"expected_seq", live->last_seq + 1}}});
    }
    live->last_seq = seq;
    live->last_response = response;
    return response;
}

std::vector<std::string> StudyService::log_files(const std::string& session_id) const {
    auto live = find_session(session_id);
    std::vector<std::string> out;
    for (Condition c : kConditions) {
        const auto path = log_path(*live->study, live->participant, c);
        if (std::filesystem::exists(path)) out.push_back(path.filename().string());
    }
    return out;
}

std::string StudyService::read_log(const std::string& session_id, const std::string& file) const {
    const auto files = log_files(session_id);
    if (std::find(files.begin(), files.end(), file) == files.end()) {
        throw NotFound("no log '" + file + "' for session '" + session_id + "'");
    }
    auto live = find_session(session_id);
    std::ifstream in(log_root_ / live->study->config.id / file, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct HttpFrontend::Impl {
    StudyService& service;
    httplib::Server server;

    explicit Impl(StudyService& s) : service(s) {}
};

namespace {

template <typename F>
void guarded(httplib::Response& res, F&& body) {
    try {
        body();
    } catch (const NotFound& e) {
        res.status = 404;
        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
}

}  // namespace

HttpFrontend::HttpFrontend(StudyService& service, std::optional<std::filesystem::path> web_root)
    : impl_(std::make_unique<Impl>(service)) {
    auto& srv = impl_->server;
    StudyService* svc = &service;

    srv.Post("/api/studies", [svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = svc->create_study(study_config_from_json(json::parse(req.body)));
            res.status = 201;
            res.set_content(json{{"study_id", id}}.dump(), "application/json");
        });
    });
    srv.Post(R"(/api/studies/([^/]+)/sessions)",
             [svc](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                     const json body = json::parse(req.body.empty() ? "{}" : req.body);
                     const json state =
                         svc->start_session(req.matches[1], body.value("participant", std::size_t{0}));
                     res.set_content(state.dump(), "application/json");
                 });
             });
    srv.Post(R"(/api/sessions/([^/]+)/messages)",
             [svc](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                     res.set_content(svc->handle(req.matches[1], json::parse(req.body)).dump(),
                                     "application/json");
                 });
             });
    srv.Get(R"(/api/sessions/([^/]+)/logs)", [svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { res.set_content(json(svc->log_files(req.matches[1])).dump(), "application/json"); });
    });
    srv.Get(R"(/api/sessions/([^/]+)/logs/([^/]+))",
            [svc](const httplib::Request& req, httplib::Response& res) {
                guarded(res, [&] {
                    res.set_content(svc->read_log(req.matches[1], req.matches[2]), "application/x-ndjson");
                });
            });
    if (web_root) srv.set_mount_point("/", web_root->string());
}

HttpFrontend::~HttpFrontend() = default;

int HttpFrontend::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool HttpFrontend::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }

bool HttpFrontend::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpFrontend::stop() { impl_->server.stop(); }

}  // namespace keyfault
