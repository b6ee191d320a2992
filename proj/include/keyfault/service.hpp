#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "keyfault/dictionary.hpp"
#include "keyfault/error.hpp"
#include "keyfault/injection.hpp"
#include "keyfault/planning.hpp"
#include "keyfault/typing_session.hpp"

namespace keyfault {

class NotFound : public Error {
public:
    using Error::Error;
};

struct StudyConfig {
    std::string id;  ///< generated when empty
    std::uint64_t seed = 0;
    std::vector<PhraseSet> phrase_sets;  ///< four sets
    InjectionMode mode = InjectionMode::PerWord;  ///< used in C2/C4
    double p_t = 0.15;
    bool autocorrect = false;  ///< only changes the minor-error highlight colour
    std::size_t suggestion_count = 3;
};

/// Builds a StudyConfig from the create-study request body:
///
///     {"id": "pilot", "seed": 7, "mode": "word", "pt": 0.15,
///      "phrase_sets": [["..."], ...]}            or
///     {"phrases": ["..."], "set_size": 14, ...}  (partitioned with `seed`)
StudyConfig study_config_from_json(const nlohmann::json& body);

/// Live study sessions. Transport independent: every client message goes
/// through handle() and the returned server messages go back verbatim.
///
/// Client message: {"seq": n, "t": client_ms, "kind": k, "payload": {...}}
/// with kind one of key {ch, physical?}, backspace, cursor {index},
/// pick_suggestion {start, length, word}, submit.
///
/// Server messages: buffer_state, word_feedback, phrase, session_done,
/// resync, error. Each accepted message is answered by exactly one
/// buffer_state. Sequence numbers start at 1; repeating the last one
/// replays the previous answer, any other gap yields a resync.
class StudyService {
public:
    using Clock = std::function<std::int64_t()>;

    StudyService(std::shared_ptr<const InjectionModel> model,
                 std::shared_ptr<const Dictionary> dictionary, std::filesystem::path log_root,
                 Clock clock = {});
    ~StudyService();

    std::string create_study(StudyConfig config);

    /// Starts, or resumes from memory or from persisted logs, the
    /// participant's session. Throws NotFound for an unknown study.
    nlohmann::json start_session(const std::string& study_id, std::size_t participant);

    /// Throws NotFound for an unknown session.
    nlohmann::json handle(const std::string& session_id, const nlohmann::json& message);

    /// Persisted log files of a session, by file name.
    std::vector<std::string> log_files(const std::string& session_id) const;
    std::string read_log(const std::string& session_id, const std::string& file) const;

    /// Test hook: makes the next durable write fail.
    void fail_next_write() { fail_next_write_ = true; }

private:
    struct Study;
    struct Live;

    std::shared_ptr<Study> find_study(const std::string& id) const;
    std::shared_ptr<Live> find_session(const std::string& id) const;
    std::filesystem::path log_path(const Study& study, std::size_t participant, Condition c) const;
    void open_condition(Live& live, std::int64_t t);
    nlohmann::json state_message(const Live& live) const;
    nlohmann::json phrase_message(const Live& live) const;
    nlohmann::json buffer_state(const Live& live, std::uint64_t ack) const;
    nlohmann::json apply(Live& live, const nlohmann::json& message);
    void persist(Live& live, const TypingSession& typing);

    std::shared_ptr<const InjectionModel> model_;
    std::shared_ptr<const Dictionary> dictionary_;
    std::filesystem::path log_root_;
    Clock clock_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Study>> studies_;
    std::map<std::string, std::shared_ptr<Live>> sessions_;
    std::atomic<bool> fail_next_write_{false};
};

/// HTTP front end for a StudyService.
///
///     POST /api/studies                      create-study
///     POST /api/studies/{id}/sessions        start-session {"participant": n}
///     POST /api/sessions/{id}/messages       session channel (keep-alive)
///     GET  /api/sessions/{id}/logs           list log files
///     GET  /api/sessions/{id}/logs/{file}    download a log verbatim
///     GET  /...                              static UI files, when a web root is set
class HttpFrontend {
public:
    explicit HttpFrontend(StudyService& service,
                          std::optional<std::filesystem::path> web_root = std::nullopt);
    ~HttpFrontend();

    /// Binds to an ephemeral port and returns it, or -1.
    int bind_any_port(const std::string& host);
    bool bind(const std::string& host, int port);
    /// Blocks until stop().
    bool listen_after_bind();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace keyfault
