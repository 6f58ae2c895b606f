#pragma once

// Tutoring-session service: session store, dialogue driver and the JSON
// HTTP API on top of it.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

// Eigen must precede httplib: <resolv.h> defines a macro named _res.
#include <Eigen/Dense>
#include <httplib.h>

#include "hintgen/adapters.hpp"
#include "hintgen/corpus.hpp"
#include "hintgen/error.hpp"
#include "hintgen/eval.hpp"
#include "hintgen/feedback.hpp"
#include "hintgen/question_bank.hpp"
#include "hintgen/similarity.hpp"

namespace hintgen {

struct TranscriptEntry {
    std::string speaker; // "system" or "student"
    std::string text;
    /// system: problem, feedback, sub_question, mcq, prompt, verdict
    /// student: answer, sub_answer, mcq_choice
    std::string kind;
    std::int64_t timestamp_ms = 0;

    bool operator==(const TranscriptEntry &) const = default;
};

inline void to_json(json &j, const TranscriptEntry &e) {
    j = json{{"speaker", e.speaker}, {"text", e.text}, {"kind", e.kind}, {"timestamp_ms", e.timestamp_ms}};
}

inline void from_json(const json &j, TranscriptEntry &e) {
    j.at("speaker").get_to(e.speaker);
    j.at("text").get_to(e.text);
    j.at("kind").get_to(e.kind);
    j.at("timestamp_ms").get_to(e.timestamp_ms);
}

struct SessionResource {
    std::string session_id;
    std::string exercise_id;
    std::string problem;
    DialogueState state;
    std::vector<TranscriptEntry> transcript;

    bool operator==(const SessionResource &) const = default;
};

/// Input mode a client should offer in the given phase.
inline std::string_view input_mode(Phase p) {
    switch (p) {
    case Phase::awaiting_mcq: return "mcq_buttons";
    case Phase::done: return "disabled";
    default: return "free_text";
    }
}

inline void to_json(json &j, const SessionResource &s) {
    j = json{{"session_id", s.session_id},
             {"exercise", {{"id", s.exercise_id}, {"problem", s.problem}}},
             {"phase", to_string(s.state.phase)},
             {"input_mode", input_mode(s.state.phase)},
             {"state", s.state},
             {"transcript", s.transcript}};
    if (s.state.phase == Phase::awaiting_mcq && s.state.last_feedback && s.state.last_feedback->mcq_options)
        j["mcq_options"] = json::array({s.state.last_feedback->mcq_options->first,
                                        s.state.last_feedback->mcq_options->second});
}

inline void from_json(const json &j, SessionResource &s) {
    j.at("session_id").get_to(s.session_id);
    j.at("exercise").at("id").get_to(s.exercise_id);
    j.at("exercise").at("problem").get_to(s.problem);
    j.at("state").get_to(s.state);
    j.at("transcript").get_to(s.transcript);
}

/// Student turn: free text or one of the two MCQ options.
struct MessageInput {
    std::optional<std::string> text;
    std::optional<std::string> mcq_choice;
};

/// Parses {"text": ...} or {"mcq_choice": ...}; exactly one must be present.
inline MessageInput parse_message_body(std::string_view body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception &e) {
        throw ValidationError(std::string("malformed JSON body: ") + e.what());
    }
    if (!j.is_object())
        throw ValidationError("message body must be a JSON object");
    MessageInput in;
    if (j.contains("text")) {
        if (!j["text"].is_string())
            throw ValidationError("'text' must be a string");
        in.text = j["text"].get<std::string>();
    }
    if (j.contains("mcq_choice")) {
        if (!j["mcq_choice"].is_string())
            throw ValidationError("'mcq_choice' must be a string");
        in.mcq_choice = j["mcq_choice"].get<std::string>();
    }
    if (in.text.has_value() == in.mcq_choice.has_value())
        throw ValidationError("body needs exactly one of 'text' or 'mcq_choice'");
    const auto &v = in.text ? *in.text : *in.mcq_choice;
    if (text::trim(v).empty())
        throw ValidationError("message is empty");
    return in;
}

struct MessageResult {
    std::string reply;
    Phase phase = Phase::awaiting_answer;
    std::optional<bool> verdict;
    std::optional<std::pair<std::string, std::string>> mcq_options;
};

inline void to_json(json &j, const MessageResult &r) {
    j = json{{"reply", r.reply}, {"phase", to_string(r.phase)}, {"input_mode", input_mode(r.phase)}};
    j["verdict"] = r.verdict ? json(*r.verdict) : json(nullptr);
    if (r.mcq_options)
        j["mcq_options"] = json::array({r.mcq_options->first, r.mcq_options->second});
}

using Clock = std::function<std::int64_t()>;

inline std::int64_t system_clock_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

struct ServiceOptions {
    DialogueConfig dialogue;
    /// When set, every session is persisted as <dir>/<session_id>.json.
    std::optional<std::filesystem::path> sessions_dir;
    Clock clock = system_clock_ms;
};

class TutoringService {
  public:
    TutoringService(std::vector<Exercise> exercises, std::shared_ptr<const FeedbackEngine> engine,
                    std::shared_ptr<const SolutionChecker> checker, std::shared_ptr<InteractionStore> store,
                    ServiceOptions options = {})
        : engine_(std::move(engine)), checker_(std::move(checker)), store_(std::move(store)),
          options_(std::move(options)) {
        if (!engine_ || !checker_ || !store_)
            throw ConfigError("service needs an engine, a checker and an interaction store");
        if (!options_.clock)
            options_.clock = system_clock_ms;
        check_unique_ids(exercises);
        for (auto &ex : exercises) {
            order_.push_back(ex.id);
            exercises_.emplace(ex.id, std::move(ex));
        }
        if (options_.sessions_dir)
            restore_sessions();
        // never reuse a session id already present in the log
        for (const auto &r : store_->records())
            bump_counter(r.session_id);
    }

    std::vector<const Exercise *> list_exercises() const {
        std::vector<const Exercise *> out;
        for (const auto &id : order_)
            out.push_back(&exercises_.at(id));
        return out;
    }

    const Exercise &exercise(const std::string &id) const {
        auto it = exercises_.find(id);
        if (it == exercises_.end())
            throw NotFoundError("unknown exercise '" + id + "'");
        return it->second;
    }

    SessionResource create_session(const std::string &exercise_id) {
        const auto &ex = exercise(exercise_id);
        auto slot = std::make_shared<Slot>();
        auto &s = slot->session;
        s.session_id = next_session_id();
        s.exercise_id = ex.id;
        s.problem = ex.problem;
        s.state.session_id = s.session_id;
        s.state.exercise_id = ex.id;
        s.transcript.push_back({"system", ex.problem, "problem", options_.clock()});
        persist(s);
        {
            std::unique_lock lock(sessions_mu_);
            sessions_.emplace(s.session_id, slot);
        }
        return s;
    }

    SessionResource get_session(const std::string &session_id) const {
        auto slot = find(session_id);
        std::lock_guard lock(slot->mu);
        return slot->session;
    }

    MessageResult post_message(const std::string &session_id, const MessageInput &input) {
        auto slot = find(session_id);
        std::lock_guard lock(slot->mu);
        const SessionResource &cur = slot->session;
        if (cur.state.phase == Phase::done)
            throw ConflictError("session '" + session_id + "' is finished");
        if (input.text.has_value() == input.mcq_choice.has_value())
            throw ValidationError("message needs exactly one of text or mcq_choice");
        if (input.mcq_choice && cur.state.phase != Phase::awaiting_mcq)
            throw ValidationError("mcq_choice is only accepted while a multiple-choice question is open");
        std::string said = input.text ? *input.text : *input.mcq_choice;
        if (text::trim(said).empty())
            throw ValidationError("message is empty");

        const auto &ex = exercise(cur.exercise_id);
        DialogueStep step;
        try {
            step = advance_dialogue(cur.state, ex, said, *engine_, *checker_, options_.dialogue);
        } catch (const StateError &e) {
            throw ConflictError(e.what());
        }

        SessionResource next = cur;
        auto now = options_.clock();
        next.transcript.push_back({"student", said, student_kind(cur.state.phase), now});
        next.transcript.push_back({"system", step.reply, system_kind(cur.state.phase, step), now});
        next.state = step.state;

        if (step.verdict) {
            InteractionRecord rec;
            rec.session_id = next.session_id;
            rec.exercise_id = next.exercise_id;
            rec.student_answer = said;
            rec.feedback_shown = step.feedback_shown;
            rec.checker_verdict = *step.verdict;
            rec.attempt_index = next.state.attempt_count;
            rec.feedback_model = engine_->config().mode;
            rec.timestamp_ms = now;
            store_->append(rec);
        }
        persist(next);
        slot->session = std::move(next);

        MessageResult r{step.reply, step.state.phase, step.verdict, std::nullopt};
        if (step.state.phase == Phase::awaiting_mcq && step.state.last_feedback)
            r.mcq_options = step.state.last_feedback->mcq_options;
        return r;
    }

    LearningGainReport learning_gain(FeedbackModel model) const {
        try {
            return learning_gain_report(store_->records(), model);
        } catch (const ValidationError &e) {
            throw NotFoundError(e.what());
        }
    }

    const InteractionStore &store() const { return *store_; }

  private:
    struct Slot {
        std::mutex mu;
        SessionResource session;
    };

    static std::string student_kind(Phase before) {
        switch (before) {
        case Phase::awaiting_subanswer: return "sub_answer";
        case Phase::awaiting_mcq: return "mcq_choice";
        default: return "answer";
        }
    }

    static std::string system_kind(Phase before, const DialogueStep &step) {
        if (step.state.phase == Phase::done)
            return "verdict";
        if (step.state.phase == Phase::awaiting_mcq)
            return before == Phase::awaiting_mcq ? "prompt" : "mcq";
        if (step.state.phase == Phase::awaiting_subanswer)
            return "sub_question";
        if (before == Phase::awaiting_subanswer)
            return "prompt";
        return "feedback";
    }

    std::shared_ptr<Slot> find(const std::string &id) const {
        std::shared_lock lock(sessions_mu_);
        auto it = sessions_.find(id);
        if (it == sessions_.end())
            throw NotFoundError("unknown session '" + id + "'");
        return it->second;
    }

    std::string next_session_id() {
        char buf[32];
        std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(++counter_));
        return buf;
    }

    void bump_counter(const std::string &session_id) {
        unsigned long long n = 0;
        char tail = 0;
        if (std::sscanf(session_id.c_str(), "s%llu%c", &n, &tail) == 1 && n > counter_)
            counter_ = n;
    }

    void persist(const SessionResource &s) const {
        if (!options_.sessions_dir)
            return;
        std::filesystem::create_directories(*options_.sessions_dir);
        auto path = *options_.sessions_dir / (s.session_id + ".json");
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << json(s).dump(2) << '\n';
            if (!out)
                throw StorageError("cannot write " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    }

    void restore_sessions() {
        const auto &dir = *options_.sessions_dir;
        if (!std::filesystem::exists(dir))
            return;
        for (const auto &entry : std::filesystem::directory_iterator(dir)) {
            if (entry.path().extension() != ".json")
                continue;
            std::ifstream in(entry.path());
            SessionResource s;
            try {
                s = json::parse(in).get<SessionResource>();
            } catch (const json::exception &e) {
                throw ParseError(entry.path().string() + ": " + e.what());
            }
            bump_counter(s.session_id);
            auto slot = std::make_shared<Slot>();
            slot->session = std::move(s);
            sessions_.emplace(slot->session.session_id, slot);
        }
    }

    std::map<std::string, Exercise> exercises_;
    std::vector<std::string> order_;
    std::shared_ptr<const FeedbackEngine> engine_;
    std::shared_ptr<const SolutionChecker> checker_;
    std::shared_ptr<InteractionStore> store_;
    ServiceOptions options_;

    mutable std::shared_mutex sessions_mu_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
    std::atomic<unsigned long long> counter_{0};
};

// ---- configuration --------------------------------------------------------------------

struct ServiceConfig {
    std::string exercises = "data/exercises.jsonl";
    std::string question_bank = "data/question_bank.jsonl"; // empty: none
    std::string templates;                                  // empty: built-in defaults
    std::string interactions = "run/interactions.jsonl";    // empty: in memory
    std::string sessions_dir;                               // empty: in memory
    /// "stub" or "adapter:<base url>"
    std::string backend = "stub";
    std::size_t embedding_dim = 256;
    double tau = 0.8;
    double tau_checker = 0.8;
    int max_attempts = 3;
    std::string feedback_model = "question_based";
    /// Generate questions for references without a bank entry.
    bool live_generation = false;
    std::string host = "127.0.0.1";
    int port = 8080;
};

inline void to_json(json &j, const ServiceConfig &c) {
    j = json{{"exercises", c.exercises},       {"question_bank", c.question_bank},
             {"templates", c.templates},       {"interactions", c.interactions},
             {"sessions_dir", c.sessions_dir}, {"backend", c.backend},
             {"embedding_dim", c.embedding_dim}, {"tau", c.tau},
             {"tau_checker", c.tau_checker},   {"max_attempts", c.max_attempts},
             {"feedback_model", c.feedback_model}, {"live_generation", c.live_generation},
             {"host", c.host},                 {"port", c.port}};
}

inline void from_json(const json &j, ServiceConfig &c) {
    ServiceConfig d;
    c.exercises = j.value("exercises", d.exercises);
    c.question_bank = j.value("question_bank", d.question_bank);
    c.templates = j.value("templates", d.templates);
    c.interactions = j.value("interactions", d.interactions);
    c.sessions_dir = j.value("sessions_dir", d.sessions_dir);
    c.backend = j.value("backend", d.backend);
    c.embedding_dim = j.value("embedding_dim", d.embedding_dim);
    c.tau = j.value("tau", d.tau);
    c.tau_checker = j.value("tau_checker", d.tau_checker);
    c.max_attempts = j.value("max_attempts", d.max_attempts);
    c.feedback_model = j.value("feedback_model", d.feedback_model);
    c.live_generation = j.value("live_generation", d.live_generation);
    c.host = j.value("host", d.host);
    c.port = j.value("port", d.port);
}

using EnvLookup = std::function<std::optional<std::string>(const char *)>;

inline std::optional<std::string> process_env(const char *name) {
    const char *v = std::getenv(name);
    return v ? std::optional<std::string>(v) : std::nullopt;
}

/// File values (when a path is given) overridden by HINTGEN_* variables.
inline ServiceConfig load_service_config(const std::optional<std::filesystem::path> &file,
                                         const EnvLookup &env = process_env) {
    ServiceConfig c;
    if (file) {
        std::ifstream in(*file);
        if (!in)
            throw ConfigError("cannot open config " + file->string());
        try {
            c = json::parse(in).get<ServiceConfig>();
        } catch (const json::exception &e) {
            throw ConfigError("config " + file->string() + ": " + e.what());
        }
    }
    auto str = [&](const char *name, std::string &dst) {
        if (auto v = env(name))
            dst = *v;
    };
    auto num = [&](const char *name, auto &dst) {
        if (auto v = env(name)) {
            try {
                if constexpr (std::is_floating_point_v<std::decay_t<decltype(dst)>>)
                    dst = std::stod(*v);
                else
                    dst = static_cast<std::decay_t<decltype(dst)>>(std::stoll(*v));
            } catch (const std::exception &) {
                throw ConfigError(std::string(name) + ": not a number: '" + *v + "'");
            }
        }
    };
    str("HINTGEN_EXERCISES", c.exercises);
    str("HINTGEN_QUESTION_BANK", c.question_bank);
    str("HINTGEN_TEMPLATES", c.templates);
    str("HINTGEN_INTERACTIONS", c.interactions);
    str("HINTGEN_SESSIONS_DIR", c.sessions_dir);
    str("HINTGEN_BACKEND", c.backend);
    str("HINTGEN_FEEDBACK_MODEL", c.feedback_model);
    str("HINTGEN_HOST", c.host);
    num("HINTGEN_EMBEDDING_DIM", c.embedding_dim);
    num("HINTGEN_TAU", c.tau);
    num("HINTGEN_TAU_CHECKER", c.tau_checker);
    num("HINTGEN_MAX_ATTEMPTS", c.max_attempts);
    num("HINTGEN_PORT", c.port);
    if (auto v = env("HINTGEN_LIVE_GENERATION"))
        c.live_generation = (*v == "1" || *v == "true");
    return c;
}

/// "stub" gives the hash backend; "adapter:<url>" an HTTP backend.
inline std::shared_ptr<const EmbeddingBackend> make_embedding_backend(const std::string &spec, std::size_t dim) {
    if (spec == "stub")
        return std::make_shared<HashEmbeddingBackend>(dim);
    if (spec.rfind("adapter:", 0) == 0)
        return std::make_shared<HttpEmbeddingBackend>(spec.substr(8), dim);
    throw ConfigError("unknown backend '" + spec + "' (expected stub or adapter:<url>)");
}

inline std::unique_ptr<TutoringService> build_service(const ServiceConfig &c, Clock clock = system_clock_ms) {
    if (!(c.tau_checker > 0 && c.tau_checker <= 1))
        throw ConfigError("tau_checker must lie in (0, 1]");
    if (c.max_attempts < 1)
        throw ConfigError("max_attempts must be >= 1");
    auto exercises = load_exercises(c.exercises);
    if (!c.question_bank.empty() && std::filesystem::exists(c.question_bank))
        load_question_bank(c.question_bank, exercises);
    auto backend = make_embedding_backend(c.backend, c.embedding_dim);
    auto templates = c.templates.empty() ? FeedbackTemplates{} : FeedbackTemplates::load(c.templates);
    std::optional<QuestionSource> source;
    if (c.live_generation)
        source = QuestionSource{std::make_shared<TemplateGenerator>(), nullptr, std::nullopt, 3};
    auto engine = std::make_shared<FeedbackEngine>(
        backend, FeedbackEngineConfig{c.tau, feedback_model_from_string(c.feedback_model)}, templates, source);
    auto checker = std::make_shared<SimilarityChecker>(backend, c.tau_checker);
    auto store = c.interactions.empty() ? std::make_shared<InteractionStore>()
                                        : std::make_shared<InteractionStore>(c.interactions);
    ServiceOptions opts;
    opts.dialogue.max_attempts = c.max_attempts;
    if (!c.sessions_dir.empty())
        opts.sessions_dir = c.sessions_dir;
    opts.clock = std::move(clock);
    return std::make_unique<TutoringService>(std::move(exercises), engine, checker, store, std::move(opts));
}

// ---- HTTP ------------------------------------------------------------------------------

inline int http_status_for(const std::exception &e) {
    if (dynamic_cast<const NotFoundError *>(&e))
        return 404;
    if (dynamic_cast<const ConflictError *>(&e))
        return 409;
    if (dynamic_cast<const ValidationError *>(&e) || dynamic_cast<const ParseError *>(&e))
        return 400;
    return 500;
}

inline std::string_view error_code_for(int status) {
    switch (status) {
    case 404: return "not_found";
    case 409: return "conflict";
    case 400: return "validation";
    default: return "internal";
    }
}

/// Routes:
///   GET  /api/exercises
///   POST /api/sessions                    {"exercise_id"}
///   GET  /api/sessions/{id}
///   POST /api/sessions/{id}/messages      {"text"} | {"mcq_choice"}
///   GET  /api/reports/learning-gain?model=question_based
inline void register_routes(httplib::Server &srv, TutoringService &svc) {
    auto guarded = [](auto handler) {
        return [handler](const httplib::Request &req, httplib::Response &res) {
            try {
                handler(req, res);
            } catch (const std::exception &e) {
                int status = http_status_for(e);
                res.status = status;
                res.set_content(json{{"error", {{"code", error_code_for(status)}, {"message", e.what()}}}}.dump(),
                                "application/json");
            }
        };
    };
    auto reply = [](httplib::Response &res, const json &body, int status = 200) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    };

    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                             {"Access-Control-Allow-Headers", "Content-Type"},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    srv.Options(R"(/api/.*)", [](const httplib::Request &, httplib::Response &res) { res.status = 204; });

    srv.Get("/api/exercises", guarded([&svc, reply](const httplib::Request &, httplib::Response &res) {
                json arr = json::array();
                for (const auto *ex : svc.list_exercises())
                    arr.push_back({{"id", ex->id}, {"problem", ex->problem}});
                reply(res, json{{"exercises", arr}});
            }));

    srv.Post("/api/sessions", guarded([&svc, reply](const httplib::Request &req, httplib::Response &res) {
                 json body;
                 try {
                     body = json::parse(req.body);
                 } catch (const json::exception &e) {
                     throw ValidationError(std::string("malformed JSON body: ") + e.what());
                 }
                 if (!body.is_object() || !body.contains("exercise_id") || !body["exercise_id"].is_string())
                     throw ValidationError("body needs a string 'exercise_id'");
                 reply(res, json(svc.create_session(body["exercise_id"].get<std::string>())), 201);
             }));

    srv.Get(R"(/api/sessions/([^/]+))", guarded([&svc, reply](const httplib::Request &req, httplib::Response &res) {
                reply(res, json(svc.get_session(req.matches[1])));
            }));

    srv.Post(R"(/api/sessions/([^/]+)/messages)",
             guarded([&svc, reply](const httplib::Request &req, httplib::Response &res) {
                 std::string id = req.matches[1];
                 svc.get_session(id); // unknown session wins over a bad body
                 reply(res, json(svc.post_message(id, parse_message_body(req.body))));
             }));

    srv.Get("/api/reports/learning-gain", guarded([&svc, reply](const httplib::Request &req, httplib::Response &res) {
                auto model = req.has_param("model") ? req.get_param_value("model") : std::string("question_based");
                FeedbackModel m;
                try {
                    m = feedback_model_from_string(model);
                } catch (const Error &e) {
                    throw ValidationError(e.what());
                }
                reply(res, json(svc.learning_gain(m)));
            }));
}

} // namespace hintgen
