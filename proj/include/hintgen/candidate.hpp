#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hintgen/error.hpp"

namespace hintgen {

using json = nlohmann::json;

/// Re-ranking features for one generated question.
struct FeatureVector {
    std::vector<double> sentence_embedding;
    double well_formedness = 0.0;
    double fluency = 0.0;          // negative perplexity
    double model_confidence = 0.0; // negative generator loss
    double question_type_score = 0.0;

    std::size_t dimension() const { return sentence_embedding.size() + 4; }

    bool operator==(const FeatureVector &) const = default;
};

/// Column subsets compared in re-ranker evaluation.
enum class FeatureSet { linguistic, sbert, ling_sbert };

inline std::string_view to_string(FeatureSet f) {
    switch (f) {
    case FeatureSet::linguistic: return "linguistic";
    case FeatureSet::sbert: return "sbert";
    case FeatureSet::ling_sbert: return "ling_sbert";
    }
    return "ling_sbert";
}

inline FeatureSet feature_set_from_string(std::string_view s) {
    if (s == "linguistic")
        return FeatureSet::linguistic;
    if (s == "sbert")
        return FeatureSet::sbert;
    if (s == "ling_sbert" || s == "ling-sbert")
        return FeatureSet::ling_sbert;
    throw ParseError("unknown feature set '" + std::string(s) + "'");
}

/// Flattens the selected columns: embedding first, then the four linguistic
/// features in declaration order.
inline std::vector<double> to_dense(const FeatureVector &f, FeatureSet set = FeatureSet::ling_sbert) {
    std::vector<double> out;
    if (set != FeatureSet::linguistic)
        out = f.sentence_embedding;
    if (set != FeatureSet::sbert) {
        out.push_back(f.well_formedness);
        out.push_back(f.fluency);
        out.push_back(f.model_confidence);
        out.push_back(f.question_type_score);
    }
    return out;
}

struct QuestionCandidate {
    std::string question;
    double model_score = 0.0;
    double confidence_loss = 0.0;
    std::optional<FeatureVector> features;
    std::optional<double> predicted_usefulness;
    /// Generator input the question was produced from.
    std::string source;

    bool operator==(const QuestionCandidate &) const = default;
};

inline void to_json(json &j, const FeatureVector &f) {
    j = json{{"sentence_embedding", f.sentence_embedding},
             {"well_formedness", f.well_formedness},
             {"fluency", f.fluency},
             {"model_confidence", f.model_confidence},
             {"question_type_score", f.question_type_score}};
}

inline void from_json(const json &j, FeatureVector &f) {
    j.at("sentence_embedding").get_to(f.sentence_embedding);
    j.at("well_formedness").get_to(f.well_formedness);
    j.at("fluency").get_to(f.fluency);
    j.at("model_confidence").get_to(f.model_confidence);
    j.at("question_type_score").get_to(f.question_type_score);
}

inline void to_json(json &j, const QuestionCandidate &c) {
    j = json{{"question", c.question},
             {"model_score", c.model_score},
             {"confidence_loss", c.confidence_loss},
             {"source", c.source}};
    if (c.features)
        j["features"] = *c.features;
    if (c.predicted_usefulness)
        j["predicted_usefulness"] = *c.predicted_usefulness;
}

inline void from_json(const json &j, QuestionCandidate &c) {
    j.at("question").get_to(c.question);
    c.model_score = j.value("model_score", 0.0);
    c.confidence_loss = j.value("confidence_loss", 0.0);
    c.source = j.value("source", std::string{});
    if (j.contains("features"))
        c.features = j.at("features").get<FeatureVector>();
    if (j.contains("predicted_usefulness"))
        c.predicted_usefulness = j.at("predicted_usefulness").get<double>();
    if (c.question.empty())
        throw ValidationError("question candidate with empty question");
    if (c.predicted_usefulness && !std::isfinite(*c.predicted_usefulness))
        throw ValidationError("non-finite predicted usefulness");
}

} // namespace hintgen
