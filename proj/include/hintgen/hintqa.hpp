#pragma once

// Hint-assisted generative QA: a QA model answers, a hint model writes
// personalized feedback on that answer, and a third model answers again from
// the question plus hint. The final answer is the beam that best entails
// the hint.

#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hintgen/corpus.hpp"
#include "hintgen/error.hpp"
#include "hintgen/eval.hpp"
#include "hintgen/feedback.hpp"
#include "hintgen/qg.hpp"
#include "hintgen/reranker.hpp"
#include "hintgen/text.hpp"

namespace hintgen {

struct QAPair {
    std::string id;
    std::string question;
    std::string answer;
};

struct HintTriple {
    std::string id;
    std::string question;
    std::string machine_answer;
    std::string hint;
};

/// One training record for the hint-conditioned QA model.
struct HqaRecord {
    std::string id;
    std::string source;
    std::string target;
};

inline void to_json(json &j, const QAPair &p) { j = json{{"id", p.id}, {"question", p.question}, {"answer", p.answer}}; }

inline void from_json(const json &j, QAPair &p) {
    j.at("id").get_to(p.id);
    j.at("question").get_to(p.question);
    j.at("answer").get_to(p.answer);
    if (text::trim(p.question).empty() || text::trim(p.answer).empty())
        throw ValidationError("QA pair '" + p.id + "' has an empty question or answer");
}

inline void to_json(json &j, const HintTriple &t) {
    j = json{{"id", t.id}, {"question", t.question}, {"machine_answer", t.machine_answer}, {"hint", t.hint}};
}

inline void from_json(const json &j, HintTriple &t) {
    j.at("id").get_to(t.id);
    j.at("question").get_to(t.question);
    j.at("machine_answer").get_to(t.machine_answer);
    j.at("hint").get_to(t.hint);
    if (text::trim(t.hint).empty())
        throw ValidationError("hint triple '" + t.id + "' has an empty hint");
}

inline void to_json(json &j, const HqaRecord &r) { j = json{{"id", r.id}, {"source", r.source}, {"target", r.target}}; }

inline void from_json(const json &j, HqaRecord &r) {
    j.at("id").get_to(r.id);
    j.at("source").get_to(r.source);
    j.at("target").get_to(r.target);
}

/// Literal placed between concatenated input segments.
inline constexpr std::string_view kSegmentSeparator = " <sep> ";

inline std::string join_segments(std::string_view first, std::string_view second) {
    constexpr std::string_view tag = "<sep>";
    if (first.find(tag) != std::string_view::npos || second.find(tag) != std::string_view::npos)
        throw ValidationError("segment contains the separator token");
    std::string out(text::trim(first));
    out += kSegmentSeparator;
    out += text::trim(second);
    return out;
}

/// entailment_prob(premise, hypothesis) in [0, 1]; deterministic.
class NLIBackend {
  public:
    virtual ~NLIBackend() = default;
    virtual double entailment_prob(std::string_view premise, std::string_view hypothesis) const = 0;
};

/// Fraction of distinct hypothesis tokens that also occur in the premise.
class OverlapNLI final : public NLIBackend {
  public:
    double entailment_prob(std::string_view premise, std::string_view hypothesis) const override {
        auto p = text::alnum_tokens(premise);
        auto h = text::alnum_tokens(hypothesis);
        std::set<std::string> ps(p.begin(), p.end()), hs(h.begin(), h.end());
        if (hs.empty())
            return 1.0;
        std::size_t hit = 0;
        for (const auto &t : hs)
            hit += ps.count(t);
        return static_cast<double>(hit) / static_cast<double>(hs.size());
    }
};

struct HintQASkip {
    std::string id;
    std::string stage;
    std::string reason;
};

namespace detail {

inline std::string top_beam(const GeneratorBackend &model, std::string_view source, const char *stage) {
    auto out = model.generate(source, 1, TrainConfig{}.max_output_tokens);
    if (out.empty() || text::trim(out.front().text).empty())
        throw StageError(stage, "model returned no output");
    return out.front().text;
}

} // namespace detail

/// Hint text for a machine answer, with the gold answer as the only reference.
inline std::string personalized_hint(const QAPair &pair, std::string_view machine_answer, const FeedbackEngine &engine) {
    Exercise ex;
    ex.id = pair.id;
    ex.problem = pair.question;
    ReferenceSolution ref;
    ref.id = pair.id + "#0";
    ref.text = pair.answer;
    ex.references.push_back(std::move(ref));
    return engine.generate_feedback(ex, machine_answer).text;
}

/// One (q, machine answer, hint) triple per pair; failing pairs are skipped
/// and reported through `skips`.
inline std::vector<HintTriple> build_hint_dataset(const std::vector<QAPair> &qa, const GeneratorBackend &qa_model,
                                                  const FeedbackEngine &engine,
                                                  std::vector<HintQASkip> *skips = nullptr) {
    std::vector<HintTriple> out;
    for (const auto &p : qa) {
        try {
            auto a_hat = detail::top_beam(qa_model, p.question, "qa");
            auto hint = personalized_hint(p, a_hat, engine);
            join_segments(p.question, a_hat); // the hint model must be able to consume it
            out.push_back({p.id, p.question, a_hat, hint});
        } catch (const std::exception &e) {
            if (skips)
                skips->push_back({p.id, "hint-dataset", e.what()});
        }
    }
    return out;
}

inline std::vector<TrainingPair> hint_training_pairs(const std::vector<HintTriple> &triples) {
    std::vector<TrainingPair> out;
    for (const auto &t : triples)
        out.push_back({t.id, join_segments(t.question, t.machine_answer), t.hint});
    return out;
}

/// source = q <sep> hint-model(q <sep> qa-model(q)), target = a.
inline std::vector<HqaRecord> build_hqa_dataset(const std::vector<QAPair> &qa, const GeneratorBackend &qa_model,
                                                const GeneratorBackend &hint_model,
                                                std::vector<HintQASkip> *skips = nullptr) {
    std::vector<HqaRecord> out;
    for (const auto &p : qa) {
        try {
            auto a_hat = detail::top_beam(qa_model, p.question, "qa");
            auto h_hat = detail::top_beam(hint_model, join_segments(p.question, a_hat), "hint");
            out.push_back({p.id, join_segments(p.question, h_hat), p.answer});
        } catch (const std::exception &e) {
            if (skips)
                skips->push_back({p.id, "hqa-dataset", e.what()});
        }
    }
    return out;
}

/// Answer with the highest entailment of the hint; ties go to the lowest index.
inline std::string entailment_select(const std::vector<std::string> &answers, std::string_view hint,
                                     const NLIBackend &nli) {
    if (answers.empty())
        throw ValidationError("entailment_select needs at least one answer");
    std::vector<double> probs;
    probs.reserve(answers.size());
    for (const auto &a : answers)
        probs.push_back(nli.entailment_prob(a, hint));
    return answers[argmax_first(probs)];
}

struct HintQAModels {
    std::shared_ptr<const GeneratorBackend> qa;
    std::shared_ptr<const GeneratorBackend> hint;
    std::shared_ptr<const GeneratorBackend> hqa;
};

/// Intermediate outputs of one inference run.
struct HintQATrace {
    std::string machine_answer;
    std::string hint;
    std::vector<std::string> candidates;
    std::string answer;
};

inline HintQATrace trace_hint_qa_inference(std::string_view question, const GeneratorBackend &qa_model,
                                           const GeneratorBackend &hint_model, const GeneratorBackend &hqa_model,
                                           const NLIBackend &nli, int k) {
    if (k < 1)
        throw ValidationError("k must be >= 1");
    HintQATrace t;
    t.machine_answer = detail::top_beam(qa_model, question, "qa");
    try {
        t.hint = detail::top_beam(hint_model, join_segments(question, t.machine_answer), "hint");
    } catch (const StageError &) {
        throw;
    } catch (const std::exception &e) {
        throw StageError("hint", e.what());
    }
    try {
        for (auto &g : hqa_model.generate(join_segments(question, t.hint), k, TrainConfig{}.max_output_tokens))
            t.candidates.push_back(std::move(g.text));
    } catch (const std::exception &e) {
        throw StageError("hqa", e.what());
    }
    if (t.candidates.empty())
        throw StageError("hqa", "model returned no output");
    try {
        t.answer = entailment_select(t.candidates, t.hint, nli);
    } catch (const std::exception &e) {
        throw StageError("entailment", e.what());
    }
    return t;
}

inline std::string run_hint_qa_inference(std::string_view question, const GeneratorBackend &qa_model,
                                         const GeneratorBackend &hint_model, const GeneratorBackend &hqa_model,
                                         const NLIBackend &nli, int k = 3) {
    return trace_hint_qa_inference(question, qa_model, hint_model, hqa_model, nli, k).answer;
}

/// Default proportions: 400 train / 50 valid / 100 test.
inline Partition<QAPair> split_qa_pairs(const std::vector<QAPair> &pairs, std::uint64_t seed) {
    return split_dataset(pairs, seed, SplitRatio{400, 50, 100});
}

struct HintQATraining {
    HintQAModels models;
    std::vector<HintTriple> hint_triples;
    std::vector<HqaRecord> hqa_records;
    std::vector<HintQASkip> skips;
};

namespace detail {

inline std::vector<TrainingPair> qa_training_pairs(const std::vector<QAPair> &qa) {
    std::vector<TrainingPair> out;
    for (const auto &p : qa)
        out.push_back({p.id, p.question, p.answer});
    return out;
}

inline std::vector<TrainingPair> hqa_training_pairs(const std::vector<HqaRecord> &rs) {
    std::vector<TrainingPair> out;
    for (const auto &r : rs)
        out.push_back({r.id, r.source, r.target});
    return out;
}

} // namespace detail

/// Trains the three models on the train split only; the valid split is used
/// for validation loss. The test split is never read.
inline HintQATraining train_hint_qa(const Partition<QAPair> &data, const GeneratorBackend &base,
                                    const FeedbackEngine &engine, const TrainConfig &config) {
    if (!base.supports_training())
        throw CapabilityError("generator backend does not support training");
    HintQATraining out;
    out.models.qa = base.fine_tune(detail::qa_training_pairs(data.train), detail::qa_training_pairs(data.valid), config)
                        .model;

    out.hint_triples = build_hint_dataset(data.train, *out.models.qa, engine, &out.skips);
    auto valid_triples = build_hint_dataset(data.valid, *out.models.qa, engine, &out.skips);
    out.models.hint =
        base.fine_tune(hint_training_pairs(out.hint_triples), hint_training_pairs(valid_triples), config).model;

    out.hqa_records = build_hqa_dataset(data.train, *out.models.qa, *out.models.hint, &out.skips);
    auto valid_hqa = build_hqa_dataset(data.valid, *out.models.qa, *out.models.hint, &out.skips);
    out.models.hqa =
        base.fine_tune(detail::hqa_training_pairs(out.hqa_records), detail::hqa_training_pairs(valid_hqa), config)
            .model;
    return out;
}

/// Ids of `test` that appear in any training artifact. Empty means clean.
inline std::vector<std::string> leaked_test_ids(const std::vector<QAPair> &test, const HintQATraining &training) {
    std::set<std::string> used;
    for (const auto &t : training.hint_triples)
        used.insert(t.id);
    for (const auto &r : training.hqa_records)
        used.insert(r.id);
    std::set<std::string> questions;
    for (const auto &t : training.hint_triples)
        questions.insert(t.question);
    std::vector<std::string> leaked;
    for (const auto &p : test)
        if (used.count(p.id) || questions.count(p.question))
            leaked.push_back(p.id);
    return leaked;
}

/// Scores on the test split for the three systems: QA only, hint-assisted
/// (top hint-conditioned beam) and hint plus entailment selection over k beams.
struct HintQAReport {
    GenEvalReport qa_only;
    GenEvalReport hint_assisted;
    GenEvalReport hint_entailment;
};

inline void to_json(json &j, const HintQAReport &r) {
    j = json{{"qa_only", r.qa_only}, {"hint_assisted", r.hint_assisted}, {"hint_entailment", r.hint_entailment}};
}

inline HintQAReport evaluate_hint_qa(const std::vector<QAPair> &test, const HintQAModels &models,
                                     const NLIBackend &nli, int k = 3) {
    std::vector<std::string> gold, base, assisted, entailed;
    for (const auto &p : test) {
        auto t = trace_hint_qa_inference(p.question, *models.qa, *models.hint, *models.hqa, nli, k);
        gold.push_back(p.answer);
        base.push_back(t.machine_answer);
        assisted.push_back(t.candidates.front());
        entailed.push_back(t.answer);
    }
    return {evaluate_generation(base, gold), evaluate_generation(assisted, gold), evaluate_generation(entailed, gold)};
}

} // namespace hintgen
