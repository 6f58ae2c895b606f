#pragma once

// Personalized question-based feedback and the multi-turn follow-up protocol
// (sub-question, retry, multiple-choice repair).

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "hintgen/cause_effect.hpp"
#include "hintgen/corpus.hpp"
#include "hintgen/error.hpp"
#include "hintgen/error_classifier.hpp"
#include "hintgen/qg.hpp"
#include "hintgen/question_bank.hpp"
#include "hintgen/reranker.hpp"
#include "hintgen/similarity.hpp"

namespace hintgen {

/// Every user-visible string of the tutoring dialogue. Placeholders:
/// {e_s} {c_s} student effect/cause, {e_r} {c_r} reference effect/cause,
/// {q} the selected question with its trailing '?' removed.
struct FeedbackTemplates {
    int version = 1;
    std::string incorrect_cause_incorrect_effect = "\"{e_s}\" is incorrect. {q}?";
    std::string missing_cause_correct_effect = "\"{e_s}\" is correct! Try supplying a reason for it. {q}?";
    std::string incorrect_cause_correct_effect = "\"{e_s}\" is correct! Try changing your reasoning. {q}?";
    std::string correct_cause_incorrect_effect = "Did you mean \"{e_r}\" because \"{c_s}\"?";
    std::string mcq_agree = "Yes, I agree";
    std::string mcq_disagree = "No, I disagree";
    std::string minimal = "That's not quite right. Please try again.";
    std::string subanswer_ack = "Ok, now try to answer the original exercise.";
    std::string correct = "That's correct!";
    std::string give_up = "Let's move to another problem.";
    std::string mcq_reprompt = "Please choose one of the options: \"Yes, I agree\" or \"No, I disagree\".";

    bool operator==(const FeedbackTemplates &) const = default;

    static FeedbackTemplates load(const std::filesystem::path &path);
};

inline void to_json(json &j, const FeedbackTemplates &t) {
    j = json{{"version", t.version},
             {"incorrect_cause_incorrect_effect", t.incorrect_cause_incorrect_effect},
             {"missing_cause_correct_effect", t.missing_cause_correct_effect},
             {"incorrect_cause_correct_effect", t.incorrect_cause_correct_effect},
             {"correct_cause_incorrect_effect", t.correct_cause_incorrect_effect},
             {"mcq_options", json::array({t.mcq_agree, t.mcq_disagree})},
             {"minimal", t.minimal},
             {"subanswer_ack", t.subanswer_ack},
             {"correct", t.correct},
             {"give_up", t.give_up},
             {"mcq_reprompt", t.mcq_reprompt}};
}

inline void from_json(const json &j, FeedbackTemplates &t) {
    FeedbackTemplates d;
    t.version = j.at("version").get<int>();
    t.incorrect_cause_incorrect_effect = j.value("incorrect_cause_incorrect_effect", d.incorrect_cause_incorrect_effect);
    t.missing_cause_correct_effect = j.value("missing_cause_correct_effect", d.missing_cause_correct_effect);
    t.incorrect_cause_correct_effect = j.value("incorrect_cause_correct_effect", d.incorrect_cause_correct_effect);
    t.correct_cause_incorrect_effect = j.value("correct_cause_incorrect_effect", d.correct_cause_incorrect_effect);
    if (j.contains("mcq_options")) {
        auto opts = j.at("mcq_options").get<std::vector<std::string>>();
        if (opts.size() != 2)
            throw ValidationError("mcq_options must hold exactly two strings");
        t.mcq_agree = opts[0];
        t.mcq_disagree = opts[1];
    }
    t.minimal = j.value("minimal", d.minimal);
    t.subanswer_ack = j.value("subanswer_ack", d.subanswer_ack);
    t.correct = j.value("correct", d.correct);
    t.give_up = j.value("give_up", d.give_up);
    t.mcq_reprompt = j.value("mcq_reprompt", d.mcq_reprompt);
}

inline FeedbackTemplates FeedbackTemplates::load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw StorageError("cannot open " + path.string());
    try {
        return json::parse(in).get<FeedbackTemplates>();
    } catch (const json::exception &e) {
        throw ParseError(std::string("template file: ") + e.what());
    }
}

/// Single-pass placeholder substitution; substituted text is never rescanned.
inline std::string render_template(std::string_view tmpl, const std::map<std::string, std::string> &vars) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i);
            if (close != std::string_view::npos) {
                auto it = vars.find(std::string(tmpl.substr(i + 1, close - i - 1)));
                if (it != vars.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

enum class FeedbackKind { statement_plus_question, mcq, minimal };
enum class Followup { expect_subanswer_then_retry, expect_mcq_choice, expect_retry };

inline std::string_view to_string(FeedbackKind k) {
    switch (k) {
    case FeedbackKind::statement_plus_question: return "statement_plus_question";
    case FeedbackKind::mcq: return "mcq";
    case FeedbackKind::minimal: return "minimal";
    }
    return "minimal";
}

inline std::string_view to_string(Followup f) {
    switch (f) {
    case Followup::expect_subanswer_then_retry: return "expect_subanswer_then_retry";
    case Followup::expect_mcq_choice: return "expect_mcq_choice";
    case Followup::expect_retry: return "expect_retry";
    }
    return "expect_retry";
}

struct FeedbackMessage {
    ErrorCategory category = ErrorCategory::NoDetectedError;
    std::string text;
    FeedbackKind kind = FeedbackKind::minimal;
    std::optional<std::pair<std::string, std::string>> mcq_options;
    Followup followup = Followup::expect_retry;
    std::optional<std::string> question;
    std::string reference_id;

    bool operator==(const FeedbackMessage &) const = default;
};

inline void to_json(json &j, const FeedbackMessage &m) {
    j = json{{"category", to_string(m.category)},
             {"text", m.text},
             {"kind", to_string(m.kind)},
             {"followup", to_string(m.followup)},
             {"reference_id", m.reference_id}};
    if (m.mcq_options)
        j["mcq_options"] = json::array({m.mcq_options->first, m.mcq_options->second});
    if (m.question)
        j["question"] = *m.question;
}

inline void from_json(const json &j, FeedbackMessage &m) {
    m.category = error_category_from_string(j.at("category").get<std::string>());
    j.at("text").get_to(m.text);
    auto kind = j.at("kind").get<std::string>();
    m.kind = kind == "mcq" ? FeedbackKind::mcq
             : kind == "statement_plus_question" ? FeedbackKind::statement_plus_question
                                                 : FeedbackKind::minimal;
    auto f = j.at("followup").get<std::string>();
    m.followup = f == "expect_mcq_choice"             ? Followup::expect_mcq_choice
                 : f == "expect_subanswer_then_retry" ? Followup::expect_subanswer_then_retry
                                                      : Followup::expect_retry;
    m.reference_id = j.value("reference_id", std::string{});
    if (j.contains("mcq_options")) {
        auto o = j.at("mcq_options").get<std::vector<std::string>>();
        if (o.size() != 2)
            throw ValidationError("mcq_options must hold two strings");
        m.mcq_options = std::make_pair(o[0], o[1]);
    }
    if (j.contains("question"))
        m.question = j.at("question").get<std::string>();
}

/// Live generation fallback for references without a precomputed bank.
struct QuestionSource {
    std::shared_ptr<const GeneratorBackend> generator;
    std::shared_ptr<const AuxiliaryScorers> scorers; // optional
    std::optional<RerankerModel> reranker;           // used only with scorers
    int k = 3;
};

struct FeedbackEngineConfig {
    double tau = 0.8;
    FeedbackModel mode = FeedbackModel::question_based;
};

class FeedbackEngine {
  public:
    FeedbackEngine(std::shared_ptr<const EmbeddingBackend> backend, FeedbackEngineConfig config = {},
                   FeedbackTemplates templates = {}, std::optional<QuestionSource> source = std::nullopt)
        : backend_(std::move(backend)), config_(config), templates_(std::move(templates)), source_(std::move(source)) {
        if (!backend_)
            throw ConfigError("feedback engine needs an embedding backend");
        if (!(config_.tau > 0.0 && config_.tau <= 1.0))
            throw ConfigError("tau must lie in (0, 1]");
        if (config_.mode != FeedbackModel::question_based && config_.mode != FeedbackModel::minimal)
            throw ConfigError("feedback engine supports question_based and minimal modes");
    }

    const FeedbackTemplates &templates() const { return templates_; }
    const EmbeddingBackend &backend() const { return *backend_; }
    const FeedbackEngineConfig &config() const { return config_; }

    /// Nearest reference, decomposition of both answers, classification, then
    /// the category's template filled with the best question for the reference.
    FeedbackMessage generate_feedback(const Exercise &exercise, std::string_view student_answer) const {
        if (text::trim(student_answer).empty())
            throw ValidationError("student answer is empty");
        if (exercise.references.empty())
            throw ValidationError("exercise '" + exercise.id + "' has no references");

        FeedbackMessage msg;
        if (config_.mode == FeedbackModel::minimal) {
            msg.text = templates_.minimal;
            return msg;
        }

        const auto &ref = nearest_reference(student_answer, exercise.references, *backend_);
        msg.reference_id = ref.id;
        Decomposition dr = decomposition_of(ref);
        Decomposition ds = decompose(student_answer);
        msg.category = classify(ds, dr, *backend_, config_.tau);

        std::map<std::string, std::string> vars{{"e_s", ds.effect}, {"c_s", ds.cause}, {"e_r", dr.effect},
                                                {"c_r", dr.cause}};
        auto with_question = [&](const std::string &tmpl) {
            auto q = select_question(ref);
            msg.question = q;
            vars["q"] = text::strip_trailing_question_marks(q);
            msg.kind = FeedbackKind::statement_plus_question;
            msg.followup = Followup::expect_subanswer_then_retry;
            msg.text = render_template(tmpl, vars);
        };

        switch (msg.category) {
        case ErrorCategory::IncorrectCauseIncorrectEffect:
            with_question(templates_.incorrect_cause_incorrect_effect);
            break;
        case ErrorCategory::MissingCauseCorrectEffect:
            with_question(templates_.missing_cause_correct_effect);
            break;
        case ErrorCategory::IncorrectCauseCorrectEffect:
            with_question(templates_.incorrect_cause_correct_effect);
            break;
        case ErrorCategory::CorrectCauseIncorrectEffect:
            msg.kind = FeedbackKind::mcq;
            msg.followup = Followup::expect_mcq_choice;
            msg.mcq_options = std::make_pair(templates_.mcq_agree, templates_.mcq_disagree);
            msg.text = render_template(templates_.correct_cause_incorrect_effect, vars);
            break;
        case ErrorCategory::NoDetectedError:
            msg.text = templates_.minimal;
            break;
        }
        return msg;
    }

    /// Highest predicted usefulness from the bank, else live generation.
    std::string select_question(const ReferenceSolution &ref) const {
        if (!ref.question_bank.empty())
            return ref.question_bank[select_from_bank(ref.question_bank)].question;
        if (!source_ || !source_->generator)
            throw ConfigError("reference '" + ref.id + "' has no question bank and no generator is configured");
        auto cands = generate_candidates(ref, *source_->generator, source_->k);
        if (source_->scorers && source_->reranker) {
            score_candidates(cands, *source_->scorers, *source_->reranker);
            return cands[select_from_bank(cands)].question;
        }
        return cands.front().question;
    }

  private:
    std::shared_ptr<const EmbeddingBackend> backend_;
    FeedbackEngineConfig config_;
    FeedbackTemplates templates_;
    std::optional<QuestionSource> source_;
};

// ---- solution checking ---------------------------------------------------------------

/// Decides whether an attempt at the original exercise is correct.
class SolutionChecker {
  public:
    virtual ~SolutionChecker() = default;
    virtual bool check(const Exercise &exercise, std::string_view answer) const = 0;
};

/// True iff the best f1 against any reference reaches tau_checker.
inline bool solution_check(std::string_view answer, const Exercise &exercise, const EmbeddingBackend &backend,
                           double tau_checker = 0.8) {
    if (exercise.references.empty())
        throw ValidationError("exercise '" + exercise.id + "' has no references");
    auto ea = backend.embed_tokens(answer);
    if (ea.empty())
        return false;
    double best = -1.0;
    for (const auto &ref : exercise.references) {
        auto er = backend.embed_tokens(ref.text);
        if (!er.empty())
            best = std::max(best, token_similarity(ea, er).f1);
    }
    return best >= tau_checker;
}

class SimilarityChecker final : public SolutionChecker {
  public:
    SimilarityChecker(std::shared_ptr<const EmbeddingBackend> backend, double tau_checker = 0.8)
        : backend_(std::move(backend)), tau_(tau_checker) {}

    bool check(const Exercise &exercise, std::string_view answer) const override {
        return solution_check(answer, exercise, *backend_, tau_);
    }

  private:
    std::shared_ptr<const EmbeddingBackend> backend_;
    double tau_;
};

// ---- dialogue protocol ---------------------------------------------------------------------

enum class Phase { awaiting_answer, awaiting_subanswer, awaiting_retry, awaiting_mcq, done };

inline std::string_view to_string(Phase p) {
    switch (p) {
    case Phase::awaiting_answer: return "awaiting_answer";
    case Phase::awaiting_subanswer: return "awaiting_subanswer";
    case Phase::awaiting_retry: return "awaiting_retry";
    case Phase::awaiting_mcq: return "awaiting_mcq";
    case Phase::done: return "done";
    }
    return "done";
}

inline Phase phase_from_string(std::string_view s) {
    for (auto p : {Phase::awaiting_answer, Phase::awaiting_subanswer, Phase::awaiting_retry, Phase::awaiting_mcq,
                   Phase::done})
        if (to_string(p) == s)
            return p;
    throw ParseError("unknown phase '" + std::string(s) + "'");
}

inline bool is_legal_transition(Phase from, Phase to) {
    switch (from) {
    case Phase::awaiting_answer:
    case Phase::awaiting_retry:
        return to == Phase::awaiting_subanswer || to == Phase::awaiting_mcq || to == Phase::awaiting_retry ||
               to == Phase::done;
    case Phase::awaiting_subanswer: return to == Phase::awaiting_retry;
    case Phase::awaiting_mcq: return to == Phase::done;
    case Phase::done: return false;
    }
    return false;
}

struct DialogueState {
    std::string session_id;
    std::string exercise_id;
    Phase phase = Phase::awaiting_answer;
    int attempt_count = 0;
    std::optional<FeedbackMessage> last_feedback;

    bool operator==(const DialogueState &) const = default;
};

inline void to_json(json &j, const DialogueState &s) {
    j = json{{"session_id", s.session_id},
             {"exercise_id", s.exercise_id},
             {"phase", to_string(s.phase)},
             {"attempt_count", s.attempt_count}};
    j["last_feedback"] = s.last_feedback ? json(*s.last_feedback) : json(nullptr);
}

inline void from_json(const json &j, DialogueState &s) {
    j.at("session_id").get_to(s.session_id);
    j.at("exercise_id").get_to(s.exercise_id);
    s.phase = phase_from_string(j.at("phase").get<std::string>());
    j.at("attempt_count").get_to(s.attempt_count);
    if (j.contains("last_feedback") && !j.at("last_feedback").is_null())
        s.last_feedback = j.at("last_feedback").get<FeedbackMessage>();
}

/// Outcome of one student turn.
struct DialogueStep {
    DialogueState state;
    std::string reply;
    /// Set when the turn was an evaluated attempt (checker or MCQ choice).
    std::optional<bool> verdict;
    /// Feedback shown because of this turn, if any.
    std::optional<std::string> feedback_shown;
};

struct DialogueConfig {
    int max_attempts = 3;
};

/// Advances a session by one student turn.
///  - awaiting_subanswer: the reply is ignored; ask for the original exercise again.
///  - awaiting_mcq: agree marks correct, disagree marks incorrect; anything else re-prompts.
///  - awaiting_answer / awaiting_retry: run the checker, then feedback or finish.
inline DialogueStep advance_dialogue(const DialogueState &state, const Exercise &exercise, std::string_view input,
                                     const FeedbackEngine &engine, const SolutionChecker &checker,
                                     DialogueConfig config = {}) {
    const auto &t = engine.templates();
    if (state.phase == Phase::done)
        throw StateError("session '" + state.session_id + "' is finished");

    DialogueStep step{state, {}, std::nullopt, std::nullopt};
    auto &next = step.state;
    std::string_view answer = text::trim(input);

    switch (state.phase) {
    case Phase::awaiting_subanswer:
        next.phase = Phase::awaiting_retry;
        step.reply = t.subanswer_ack;
        break;

    case Phase::awaiting_mcq:
        if (text::to_lower(answer) == text::to_lower(t.mcq_agree)) {
            ++next.attempt_count;
            next.phase = Phase::done;
            step.verdict = true;
            step.reply = t.correct;
        } else if (text::to_lower(answer) == text::to_lower(t.mcq_disagree)) {
            ++next.attempt_count;
            next.phase = Phase::done;
            step.verdict = false;
            step.reply = t.give_up;
            step.feedback_shown = t.give_up;
        } else {
            step.reply = t.mcq_reprompt;
            return step;
        }
        break;

    case Phase::awaiting_answer:
    case Phase::awaiting_retry: {
        if (answer.empty())
            throw ValidationError("empty answer");
        ++next.attempt_count;
        bool ok = checker.check(exercise, answer);
        step.verdict = ok;
        if (ok) {
            next.phase = Phase::done;
            step.reply = t.correct;
        } else if (next.attempt_count >= config.max_attempts) {
            next.phase = Phase::done;
            step.reply = t.give_up;
            step.feedback_shown = t.give_up;
        } else {
            auto fb = engine.generate_feedback(exercise, answer);
            switch (fb.followup) {
            case Followup::expect_subanswer_then_retry: next.phase = Phase::awaiting_subanswer; break;
            case Followup::expect_mcq_choice: next.phase = Phase::awaiting_mcq; break;
            case Followup::expect_retry: next.phase = Phase::awaiting_retry; break;
            }
            step.reply = fb.text;
            step.feedback_shown = fb.text;
            next.last_feedback = std::move(fb);
        }
        break;
    }

    case Phase::done: break;
    }

    if (!is_legal_transition(state.phase, next.phase))
        throw std::logic_error("illegal dialogue transition " + std::string(to_string(state.phase)) + " -> " +
                               std::string(to_string(next.phase)));
    return step;
}

} // namespace hintgen
