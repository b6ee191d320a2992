#include <doctest.h>

#include <httplib.h>

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>

#include "keyfault/error.hpp"
#include "keyfault/metrics.hpp"
#include "keyfault/service.hpp"
#include "keyfault/session_log.hpp"

using namespace keyfault;
using nlohmann::json;

namespace {

std::shared_ptr<const InjectionModel> bundled_model() {
    static const auto model = std::make_shared<const InjectionModel>(
        load_layout_file(KEYFAULT_DATA_DIR "/qwerty.layout"),
        load_matrix_file(KEYFAULT_DATA_DIR "/synthetic.matrix"));
    return model;
}

std::shared_ptr<const Dictionary> words() {
    static const auto d = std::make_shared<const Dictionary>(Dictionary::load(KEYFAULT_DATA_DIR "/words.txt"));
    return d;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static int n = 0;
        path = std::filesystem::temp_directory_path() /
               ("keyfault_service_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
        std::filesystem::remove_all(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

StudyConfig small_study(double p_t = 0.15) {
    StudyConfig c;
    c.id = "pilot";
    c.seed = 7;
    c.p_t = p_t;
    for (std::size_t i = 0; i < 4; ++i) {
        c.phrase_sets.push_back(PhraseSet{i, {"set " + std::to_string(i) + " first", "set " + std::to_string(i) + " second"}});
    }
    return c;
}

std::string small_study_json() {
    json sets = json::array();
    for (const auto& s : small_study().phrase_sets) sets.push_back(s.phrases);
    return json{{"id", "pilot"}, {"seed", 7}, {"phrase_sets", sets}}.dump();
}

// Client side of the session channel.
struct Client {
    StudyService& svc;
    std::string id;
    std::uint64_t seq = 0;
    std::int64_t t = 0;

    json send(const std::string& kind, json payload = json::object()) {
        return svc.handle(id, json{{"seq", ++seq}, {"t", t += 300}, {"kind", kind}, {"payload", payload}});
    }
    json type(const std::string& text) {
        json last;
        for (char c : text) last = send("key", {{"ch", std::string(1, c)}});
        return last;
    }
};

const json* find_kind(const json& msgs, const std::string& kind) {
    for (const auto& m : msgs)
        if (m.at("kind") == kind) return &m;
    return nullptr;
}

}  // namespace

TEST_CASE("starting a session delivers the first phrase of the plan") {
    TempDir dir;
    StudyService svc(bundled_model(), words(), dir.path, [] { return 0; });
    svc.create_study(small_study());
    const json s = svc.start_session("pilot", 0);
    CHECK(s.at("session_id") == "pilot-p0");
    CHECK(s.at("order") == json::array({"C1", "C2", "C4", "C3"}));
    CHECK(s.at("phrase").at("index") == 0);
    CHECK(s.at("phrase").at("count") == 2);
    CHECK(s.at("phrase").at("condition") == "C1");
    CHECK_THROWS_AS(svc.start_session("nope", 0), NotFound);
    CHECK_THROWS_AS(svc.handle("nope-p0", json{{"seq", 1}, {"kind", "key"}}), NotFound);

    std::set<json> orders;
    for (std::size_t p = 0; p < 4; ++p) orders.insert(svc.start_session("pilot", p).at("order"));
    CHECK(orders.size() == 4);
}

TEST_CASE("C1 echoes keys and every message gets exactly one buffer state") {
    TempDir dir;
    StudyService svc(bundled_model(), words(), dir.path, [] { return 0; });
    svc.create_study(small_study());
    Client c{svc, svc.start_session("pilot", 0).at("session_id")};
    const json r = c.send("key", {{"ch", "a"}});
    REQUIRE(r.size() == 1);
    CHECK(r[0].at("kind") == "buffer_state");
    CHECK(r[0].at("text") == "a");
    CHECK(r[0].at("ack") == 1);
    CHECK(r[0].at("suggestions").size() == 3);
}

TEST_CASE("C4 commit of a near miss gets minor feedback with a span") {
    TempDir dir;
    StudyService svc(bundled_model(), words(), dir.path, [] { return 0; });
    svc.create_study(small_study(0.0));  // no injection, so the typed word is what shows
    const json start = svc.start_session("pilot", 3);
    REQUIRE(start.at("phrase").at("condition") == "C4");
    Client c{svc, start.at("session_id")};
    c.type("weekwnd");
    const json r = c.send("key", {{"ch", " "}});
    const json* fb = find_kind(r, "word_feedback");
    REQUIRE(fb);
    CHECK(fb->at("class") == "minor");
    CHECK(fb->at("bar") == "orange");
    CHECK(fb->at("highlight") == "yellow");
    const auto sugg = fb->at("suggestions").get<std::vector<std::string>>();
    CHECK(std::find(sugg.begin(), sugg.end(), "weekend") != sugg.end());
    CHECK(fb->at("span") == json{{"start", 0}, {"length", 7}});
    const json* buf = find_kind(r, "buffer_state");
    REQUIRE(buf);
    REQUIRE(buf->at("highlights").size() == 1);
    CHECK(buf->at("highlights")[0].at("color") == "yellow");

    // Picking the suggestion fixes the word and clears its highlight.
    const json picked = c.send("pick_suggestion", {{"start", 0}, {"length", 7}, {"word", "weekend"}});
    CHECK(picked[0].at("text") == "weekend ");
    CHECK(picked[0].at("highlights").empty());
}

TEST_CASE("C2 feedback carries a class but no highlight") {
    TempDir dir;
    StudyService svc(bundled_model(), words(), dir.path, [] { return 0; });
    svc.create_study(small_study(0.0));
    const json start = svc.start_session("pilot", 1);
    REQUIRE(start.at("phrase").at("condition") == "C2");
    Client c{svc, start.at("session_id")};
    c.type("wkknd");
    const json r = c.send("key", {{"ch", " "}});
    const json* fb = find_kind(r, "word_feedback");
    REQUIRE(fb);
    CHECK(fb->at("class") == "serious");
    CHECK(fb->at("bar") == "red");
    CHECK(fb->at("span").is_null());
    CHECK(find_kind(r, "buffer_state")->at("highlights").empty());
}

TEST_CASE("sequence numbers: replays are idempotent, gaps resync") {
    TempDir dir;
    StudyService svc(bundled_model(), words(), dir.path, [] { return 0; });
    svc.create_study(small_study());
    Client c{svc, svc.start_session("pilot", 0).at("session_id")};
    c.type("ab");
    const json again = svc.handle(c.id, json{{"seq", 2}, {"t", 5000}, {"kind", "key"}, {"payload", {{"ch", "z"}}}});
    CHECK(again[0].at("text") == "ab");
    const json gap = svc.handle(c.id, json{{"seq", 9}, {"t", 5000}, {"kind", "key"}, {"payload", {{"ch", "z"}}}});
    REQUIRE(gap.size() == 1);
    CHECK(gap[0].at("kind") == "resync");
    CHECK(gap[0].at("expected_seq") == 3);
    CHECK(gap[0].at("text") == "ab");
}

TEST_CASE("a whole session: submits persist, conditions advance, logs replay") {
    TempDir dir;
    std::atomic<std::int64_t> now{1000};
    StudyService svc(bundled_model(), words(), dir.path, [&] { return now += 7; });
    svc.create_study(small_study(0.5));
    Client c{svc, svc.start_session("pilot", 2).at("session_id")};

    std::vector<std::string> shown;
    json last;
    for (int task = 0; task < 8; ++task) {
        c.type("hello there");
        last = c.send("submit");
        // Duplicate submit: same answer, no second log entry.
        CHECK(svc.handle(c.id, json{{"seq", c.seq}, {"kind", "submit"}}) == last);
    }
    CHECK(find_kind(last, "session_done"));
    const json after = c.send("key", {{"ch", "x"}});
    CHECK(find_kind(after, "session_done"));

    const auto files = svc.log_files(c.id);
    REQUIRE(files.size() == 4);
    for (const auto& f : files) {
        const SessionLog log = parse_log(svc.read_log(c.id, f));
        std::size_t submits = 0, decisions = 0;
        for (const auto& task : split_tasks(log.events)) {
            REQUIRE(task.submitted());
            CHECK(replay_text(task.events) == *task.submitted());
            ++submits;
        }
        for (const auto& ev : log.events) {
            if (std::holds_alternative<event::Decision>(ev.kind)) ++decisions;
            CHECK(ev.received_ms.has_value());
        }
        CHECK(submits == 2);
        const bool inj = f.find("C2") != std::string::npos || f.find("C4") != std::string::npos;
        if (!inj) CHECK(decisions == 0);
        if (inj) CHECK(decisions > 0);
        CHECK(log.header.mode == (inj ? InjectionMode::PerWord : InjectionMode::Off));
    }
    CHECK_THROWS_AS(svc.read_log(c.id, "../../etc/passwd"), NotFound);
}

TEST_CASE("the final word's pending injection is applied at submit") {
    TempDir dir;
    StudyService svc(bundled_model(), words(), dir.path, [] { return 0; });
    svc.create_study(small_study(1.0));
    const json start = svc.start_session("pilot", 1);  // starts in C2
    Client c{svc, start.at("session_id")};
    c.type("abcd");
    const json r = c.send("submit");
    const json* next = find_kind(r, "phrase");
    REQUIRE(next);
    const SessionLog log = parse_log(svc.read_log(c.id, "p1_C2.jsonl"));
    const auto decisions = [&] {
        std::vector<InjectionDecision> out;
        for (const auto& ev : log.events)
            if (const auto* d = std::get_if<event::Decision>(&ev.kind)) out.push_back(d->record);
        return out;
    }();
    REQUIRE(decisions.size() == 4);
    const auto applied = std::count_if(decisions.begin(), decisions.end(), [](const auto& d) { return d.applied; });
    CHECK(applied == 1);
    const auto& submit = std::get<event::Submit>(log.events.back().kind);
    CHECK(next->at("final_text") == submit.final_text);
    for (const auto& d : decisions)
        if (d.applied) CHECK(submit.final_text[d.offset] == d.emitted);
}

TEST_CASE("a failed write pauses the session without losing data") {
    TempDir dir;
    StudyService svc(bundled_model(), words(), dir.path, [] { return 0; });
    svc.create_study(small_study());
    Client c{svc, svc.start_session("pilot", 0).at("session_id")};
    c.type("hi");
    svc.fail_next_write();
    const json failed = c.send("submit");
    REQUIRE(failed.size() == 1);
    CHECK(failed[0].at("kind") == "error");
    CHECK(failed[0].at("paused") == true);
    CHECK(svc.log_files(c.id).empty());
    // Retry the same message.
    const json ok = svc.handle(c.id, json{{"seq", c.seq}, {"t", c.t}, {"kind", "submit"}});
    CHECK(find_kind(ok, "phrase"));
    const SessionLog log = parse_log(svc.read_log(c.id, "p0_C1.jsonl"));
    CHECK(std::count_if(log.events.begin(), log.events.end(),
                        [](const SessionEvent& e) { return std::holds_alternative<event::Submit>(e.kind); }) == 1);
}

TEST_CASE("a restarted service resumes at the first unsubmitted phrase") {
    TempDir dir;
    {
        StudyService svc(bundled_model(), words(), dir.path, [] { return 0; });
        svc.create_study(small_study());
        Client c{svc, svc.start_session("pilot", 0).at("session_id")};
        for (int task = 0; task < 3; ++task) {
            c.type("done");
            c.send("submit");
        }
        c.type("lost on restart");
    }
    StudyService svc(bundled_model(), words(), dir.path, [] { return 0; });
    svc.create_study(small_study());
    const json s = svc.start_session("pilot", 0);
    CHECK(s.at("phrase").at("condition") == "C2");
    CHECK(s.at("phrase").at("index") == 1);
    CHECK(s.at("buffer").at("text") == "");
    Client c{svc, s.at("session_id")};
    c.type("more");
    c.send("submit");
    const SessionLog log = parse_log(svc.read_log(c.id, "p0_C2.jsonl"));
    std::size_t submits = 0;
    for (const auto& task : split_tasks(log.events)) {
        REQUIRE(task.submitted());
        ++submits;
    }
    CHECK(submits == 2);
}

TEST_CASE("study configuration from JSON") {
    const auto c = study_config_from_json(json::parse(R"({"id":"s","seed":3,"mode":"key","pt":0.1,
        "phrase_sets":[["a"],["b"],["c"],["d"]]})"));
    CHECK(c.mode == InjectionMode::PerKey);
    CHECK(c.phrase_sets.size() == 4);
    std::vector<std::string> pool = load_phrases(KEYFAULT_DATA_DIR "/phrases.txt");
    const auto p = study_config_from_json(json{{"seed", 1}, {"phrases", pool}});
    CHECK(p.phrase_sets.size() == 4);
    CHECK(p.phrase_sets[0].phrases.size() == 14);
    TempDir dir;
    StudyService svc(bundled_model(), words(), dir.path);
    StudyConfig bad = small_study();
    bad.phrase_sets.pop_back();
    CHECK_THROWS_AS(svc.create_study(bad), Error);
    bad = small_study();
    bad.id = "../escape";
    CHECK_THROWS_AS(svc.create_study(bad), Error);
}

TEST_CASE("HTTP loopback") {
    TempDir dir;
    StudyService svc(bundled_model(), words(), dir.path);
    HttpFrontend http(svc);
    const int port = http.bind_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server([&] { http.listen_after_bind(); });

    httplib::Client cli("127.0.0.1", port);
    cli.set_keep_alive(true);
    auto created = cli.Post("/api/studies", small_study_json(), "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    auto started = cli.Post("/api/studies/pilot/sessions", R"({"participant":0})", "application/json");
    REQUIRE(started);
    const std::string sid = json::parse(started->body).at("session_id");

    for (int i = 0; i < 10; ++i) {
        const json msg{{"seq", i + 1}, {"t", i * 100}, {"kind", "key"}, {"payload", {{"ch", "k"}}}};
        auto r = cli.Post("/api/sessions/" + sid + "/messages", msg.dump(), "application/json");
        REQUIRE(r);
        CHECK(json::parse(r->body)[0].at("ack") == i + 1);
    }
    auto sub = cli.Post("/api/sessions/" + sid + "/messages",
                        json{{"seq", 11}, {"t", 2000}, {"kind", "submit"}}.dump(), "application/json");
    REQUIRE(sub);
    auto list = cli.Get("/api/sessions/" + sid + "/logs");
    REQUIRE(list);
    CHECK(json::parse(list->body) == json::array({"p0_C1.jsonl"}));
    auto file = cli.Get("/api/sessions/" + sid + "/logs/p0_C1.jsonl");
    REQUIRE(file);
    CHECK(file->body == svc.read_log(sid, "p0_C1.jsonl"));
    auto missing = cli.Post("/api/studies/nope/sessions", "{}", "application/json");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    auto bad = cli.Post("/api/studies", "{not json", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);

    http.stop();
    server.join();
}
