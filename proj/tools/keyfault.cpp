// keyfault: offline pipeline over the injection engine, simulator and metrics.
//
// Exit codes: 0 success, 2 missing or unreadable input, 64 usage, 70 internal.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>

#include "keyfault/dictionary.hpp"
#include "keyfault/error.hpp"
#include "keyfault/injection.hpp"
#include "keyfault/metrics.hpp"
#include "keyfault/planning.hpp"
#include "keyfault/service.hpp"
#include "keyfault/session_log.hpp"
#include "keyfault/simulator.hpp"
#include "keyfault/substitution.hpp"
#include "keyfault/typing_session.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace keyfault;

namespace {

enum Exit { kOk = 0, kMissingInput = 2, kUsage = 64, kInternal = 70 };

// Input the user pointed at is absent, unreadable or malformed.
struct InputError : Error {
    using Error::Error;
};

struct Common {
    std::uint64_t seed = 1;
    double p_t = 0.15;
    std::string mode = "word";
    std::string layout = KEYFAULT_DATA_DIR "/qwerty.layout";
    std::string matrix = KEYFAULT_DATA_DIR "/synthetic.matrix";
    std::string dict = KEYFAULT_DATA_DIR "/words.txt";
    std::string out;
};

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path)) throw InputError("no such file: " + path);
}

std::shared_ptr<const InjectionModel> load_model(const Common& c) {
    require_file(c.layout);
    require_file(c.matrix);
    return std::make_shared<const InjectionModel>(load_layout_file(c.layout), load_matrix_file(c.matrix));
}

std::shared_ptr<const Dictionary> load_dict(const Common& c) {
    require_file(c.dict);
    return std::make_shared<const Dictionary>(Dictionary::load(c.dict));
}

std::vector<fs::path> log_files(const std::vector<std::string>& inputs) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            for (const auto& e : fs::recursive_directory_iterator(in)) {
                if (e.is_regular_file() && e.path().extension() == ".jsonl") out.push_back(e.path());
            }
        } else if (fs::is_regular_file(in)) {
            out.push_back(in);
        } else {
            throw InputError("no such file or directory: " + in);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

// Nearest-rank percentile of a non-empty sample.
double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

int cmd_build_matrix(const Common& c, const std::vector<std::string>& inputs) {
    const auto files = log_files(inputs);
    if (files.empty()) throw InputError("no session logs found");

    std::vector<SuspectPair> pairs;
    std::vector<double> ratios;
    std::size_t malformed = 0;
    for (const auto& f : files) {
        const SessionLog log = read_log_file(f);
        const SuspectScan scan = extract_suspects(log);
        malformed += scan.malformed;
        pairs.insert(pairs.end(), scan.pairs.begin(), scan.pairs.end());
        const auto keys = std::count_if(log.events.begin(), log.events.end(), [](const SessionEvent& e) {
            return std::holds_alternative<event::KeyDown>(e.kind);
        });
        if (keys > 0) ratios.push_back(static_cast<double>(scan.pairs.size()) / static_cast<double>(keys));
    }
    const MatrixBuild built = build_matrix(pairs);
    const fs::path out = c.out.empty() ? fs::path("substitution.matrix") : fs::path(c.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_matrix_file(out, built.matrix);

    std::cout << "sessions: " << files.size() << "\n"
              << "suspect pairs: " << pairs.size() << " (" << built.skipped << " outside the alphabet, "
              << malformed << " malformed events skipped)\n"
              << "matrix: " << out.string() << " (" << built.matrix.nonzero() << " non-zero cells)\n";
    if (!ratios.empty()) {
        // Distribution of per-session suspect ratios in 2% bins.
        std::map<int, int> bins;
        for (double r : ratios) ++bins[std::min(10, static_cast<int>(r / 0.02))];
        std::cout << "suspect ratio per session:\n";
        for (const auto& [bin, n] : bins) {
            std::ostringstream label;
            if (bin == 10) {
                label << ">= 0.200";
            } else {
                label << std::fixed << std::setprecision(3) << bin * 0.02 << "-" << (bin + 1) * 0.02;
            }
            std::cout << "  " << std::left << std::setw(12) << label.str() << n << "\n";
        }
        std::cout << "p85 suspect ratio: " << std::fixed << std::setprecision(4) << percentile(ratios, 0.85)
                  << "\n";
    }
    return kOk;
}

int cmd_inject(const Common& c) {
    InjectionConfig cfg{parse_mode(c.mode), c.p_t, c.seed, load_model(c)};
    const std::string input{std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};

    TypingSession session(cfg);
    std::int64_t t = 0;
    for (char ch : input) session.key(t++, ch);
    session.submit(t);
    std::cout << session.text() << std::flush;

    if (!c.out.empty()) {
        auto side = open_out(c.out);
        side << json{{"seed", c.seed},
                     {"mode", to_string(cfg.mode)},
                     {"pt", c.p_t},
                     {"digest", cfg.model->digest()}}
                    .dump()
             << '\n';
        for (const auto& d : session.decisions()) {
            side << json{{"offset", d.offset},
                         {"original", std::string(1, d.original)},
                         {"emitted", std::string(1, d.emitted)},
                         {"mode", to_string(d.mode)},
                         {"applied", d.applied}}
                        .dump(-1, ' ', false, json::error_handler_t::replace)
                 << '\n';
        }
    }
    std::cerr << "seed: " << c.seed << "\n";
    return kOk;
}

int cmd_simulate(Common c, const std::string& manifest_path, bool seed_given) {
    require_file(manifest_path);
    Manifest m;
    try {
        m = load_manifest(manifest_path);
    } catch (const Error& e) {
        throw InputError(e.what());
    }
    if (!seed_given) c.seed = m.seed;
    require_file(m.phrases.string());
    const auto pool = load_phrases(m.phrases);
    const auto sets = partition_phrases(pool, m.sets, m.set_size, c.seed);
    const auto dict = load_dict(c);
    const InjectionConfig inj{m.mode, m.p_t, 0, load_model(c)};
    const auto rows = run_experiment(m.typists, sets, inj, *dict, c.seed);

    const fs::path out = c.out.empty() ? fs::path("simulation") : fs::path(c.out);
    fs::create_directories(out / "logs");
    auto reports = open_out(out / "reports.jsonl");
    std::map<Condition, std::vector<MetricsReport>> by_condition;
    for (const auto& row : rows) {
        const std::string name = "p" + std::to_string(row.participant) + "_" + to_string(row.condition);
        write_log_file(out / "logs" / (name + ".jsonl"), row.log);
        json j = json::parse(report_to_json(row.report));
        j["participant"] = row.participant;
        j["profile"] = row.profile;
        j["condition"] = to_string(row.condition);
        reports << j.dump() << '\n';
        by_condition[row.condition].push_back(row.report);
    }
    std::vector<std::pair<std::string, std::vector<MetricsReport>>> groups;
    for (const auto& [cond, rs] : by_condition) groups.emplace_back(to_string(cond), rs);
    const std::string table = format_report_table(groups);
    open_out(out / "table.txt") << table;

    std::cout << "seed: " << c.seed << "\n"
              << "reports: " << rows.size() << " (" << m.typists.size() << " typists x 4 conditions)\n"
              << "output: " << out.string() << "\n\n"
              << table;
    return kOk;
}

int cmd_analyze(const Common& c, const std::vector<std::string>& inputs) {
    const auto files = log_files(inputs);
    if (files.empty()) throw InputError("no session logs found");
    const auto dict = load_dict(c);

    std::map<std::string, std::vector<MetricsReport>> groups;
    std::ofstream reports;
    if (!c.out.empty()) reports = open_out(c.out);
    for (const auto& f : files) {
        const SessionLog log = read_log_file(f);
        const MetricsReport r = session_report(log, *dict);
        const std::string group = log.header.condition.empty() ? "all" : log.header.condition;
        groups[group].push_back(r);
        if (reports.is_open()) {
            json j = json::parse(report_to_json(r, f.filename().string()));
            j["session"] = log.header.session_id;
            j["condition"] = log.header.condition;
            reports << j.dump() << '\n';
        }
    }
    std::cout << format_report_table({groups.begin(), groups.end()});
    return kOk;
}

int cmd_plan(std::size_t participants, std::uint64_t seed) {
    for (std::size_t p = 0; p < participants; ++p) std::cout << plan_to_json(make_plan(p, seed)) << '\n';
    return kOk;
}

HttpFrontend* g_server = nullptr;

int cmd_serve(const Common& c, const std::string& addr, const std::string& log_root,
              const std::string& web_root, const std::string& study_file) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--addr", "expected host:port");
    const std::string host = addr.substr(0, colon);
    const int port = std::stoi(addr.substr(colon + 1));

    StudyService service(load_model(c), load_dict(c), log_root);
    if (!study_file.empty()) {
        require_file(study_file);
        std::ifstream in(study_file);
        json body = json::parse(in);
        if (!body.contains("seed")) body["seed"] = c.seed;
        std::cout << "study: " << service.create_study(study_config_from_json(body)) << "\n";
    }
    std::optional<fs::path> web;
    if (!web_root.empty()) web = web_root;
    HttpFrontend http(service, web);
    const bool bound = port == 0 ? (http.bind_any_port(host) > 0) : http.bind(host, port);
    if (!bound) throw Error("cannot listen on " + addr);
    g_server = &http;
    std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
    });
    std::cout << "listening on " << addr << ", logs in " << log_root << std::endl;
    http.listen_after_bind();
    g_server = nullptr;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Error-injection engine and typing-study harness"};
    app.require_subcommand(1);
    Common c;
    auto add_model_flags = [&](CLI::App* sub) {
        sub->add_option("--layout", c.layout, "keyboard layout file")->capture_default_str();
        sub->add_option("--matrix", c.matrix, "substitution matrix file")->capture_default_str();
    };
    auto add_seed = [&](CLI::App* sub) { return sub->add_option("--seed", c.seed, "random seed")->capture_default_str(); };

    std::vector<std::string> inputs;
    auto* build = app.add_subcommand("build-matrix", "learn a substitution matrix from session logs");
    build->add_option("logs", inputs, "log files or directories")->required();
    build->add_option("--out", c.out, "matrix file to write (default substitution.matrix)");

    auto* inject = app.add_subcommand("inject", "inject errors into text read from stdin");
    add_seed(inject);
    inject->add_option("--pt", c.p_t, "candidate probability")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    inject->add_option("--mode", c.mode, "off, key or word")
        ->check(CLI::IsMember({"off", "key", "word"}))
        ->capture_default_str();
    inject->add_option("--out", c.out, "decision sidecar (JSONL)");
    add_model_flags(inject);

    std::string manifest;
    auto* simulate = app.add_subcommand("simulate", "run a synthetic-typist experiment");
    simulate->add_option("manifest", manifest, "experiment manifest")->required();
    auto* sim_seed = add_seed(simulate);
    simulate->add_option("--out", c.out, "output directory (default simulation)");
    simulate->add_option("--dict", c.dict, "wordlist")->capture_default_str();
    add_model_flags(simulate);

    auto* analyze = app.add_subcommand("analyze", "report metrics for session logs");
    analyze->add_option("logs", inputs, "log files or directories")->required();
    analyze->add_option("--dict", c.dict, "wordlist")->capture_default_str();
    analyze->add_option("--out", c.out, "per-session reports (JSONL)");

    std::size_t participants = 0;
    std::uint64_t plan_seed = 0;
    auto* plan = app.add_subcommand("plan", "print study plans");
    plan->add_option("participants", participants, "number of participants")->required();
    plan->add_option("seed", plan_seed, "plan seed")->required();

    std::string addr = "127.0.0.1:8080", log_root = "study-logs", web_root, study_file;
    auto* serve = app.add_subcommand("serve", "run the live study service");
    serve->add_option("--addr", addr, "host:port")->capture_default_str();
    serve->add_option("--logs", log_root, "log directory")->capture_default_str();
    serve->add_option("--web", web_root, "static UI directory");
    serve->add_option("--study", study_file, "study to create at startup (JSON)");
    add_seed(serve);
    serve->add_option("--dict", c.dict, "wordlist")->capture_default_str();
    add_model_flags(serve);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*build) return cmd_build_matrix(c, inputs);
        if (*inject) return cmd_inject(c);
        if (*simulate) return cmd_simulate(c, manifest, sim_seed->count() > 0);
        if (*analyze) return cmd_analyze(c, inputs);
        if (*plan) return cmd_plan(participants, plan_seed);
        if (*serve) return cmd_serve(c, addr, log_root, web_root, study_file);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "keyfault: " << e.what() << "\n";
        return kUsage;
    } catch (const InputError& e) {
        std::cerr << "keyfault: " << e.what() << "\n";
        return kMissingInput;
    } catch (const ParseError& e) {
        std::cerr << "keyfault: invalid input: " << e.what() << "\n";
        return kMissingInput;
    } catch (const std::exception& e) {
        std::cerr << "keyfault: " << e.what() << "\n";
        return kInternal;
    }
    return kInternal;
}
