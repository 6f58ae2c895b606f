#pragma once

// Question re-ranking: feature extraction, least-squares usefulness
// regression and best-candidate selection.

#include <algorithm>
#include <array>
#include <cctype>
#include <limits>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hintgen/candidate.hpp"
#include "hintgen/error.hpp"
#include "hintgen/text.hpp"

namespace hintgen {

inline constexpr std::size_t kDefaultSentenceEmbeddingDim = 768;

/// Open-ended 1.0 (leading wh-word or "how"), binary with alternatives 0.8
/// (contains " or "), binary 0.5.
inline double question_type_score(std::string_view question) {
    static const std::array<std::string_view, 9> wh{"what", "why", "how", "which", "who", "whom", "whose", "when", "where"};
    auto toks = text::alnum_tokens(question);
    if (!toks.empty())
        for (auto w : wh)
            if (toks.front() == w)
                return 1.0;
    if (text::to_lower(question).find(" or ") != std::string::npos)
        return 0.8;
    return 0.5;
}

/// Auxiliary models behind the linguistic and embedding features.
class AuxiliaryScorers {
  public:
    virtual ~AuxiliaryScorers() = default;

    virtual std::vector<double> sentence_embed(std::string_view text) const = 0;
    virtual double well_formed_prob(std::string_view text) const = 0;
    virtual double perplexity(std::string_view text) const = 0;
};

/// Normalized sum of seeded hash vectors over unigrams and bigrams.
inline std::vector<double> hash_sentence_embedding(std::string_view s, std::size_t dim) {
    std::vector<double> acc(dim, 0.0);
    auto toks = text::alnum_tokens(s);
    auto add = [&](const std::string &key, std::uint64_t seed) {
        auto v = text::hash_unit_vector(key, seed, dim);
        for (std::size_t i = 0; i < dim; ++i)
            acc[i] += v[i];
    };
    for (std::size_t i = 0; i < toks.size(); ++i) {
        add(toks[i], 0x51ULL);
        if (i + 1 < toks.size())
            add(toks[i] + ' ' + toks[i + 1], 0x52ULL);
    }
    double n2 = 0.0;
    for (double x : acc)
        n2 += x * x;
    if (n2 > 0.0)
        for (double &x : acc)
            x /= std::sqrt(n2);
    return acc;
}

/// Character trigram language model with add-k smoothing.
class CharNgramLanguageModel {
  public:
    explicit CharNgramLanguageModel(double k = 0.1) : k_(k) {}

    void train(const std::vector<std::string> &texts) {
        for (const auto &t : texts) {
            std::string s = pad(t);
            for (char c : s)
                vocab_[c] = true;
            for (std::size_t i = 2; i < s.size(); ++i) {
                ++counts_[s.substr(i - 2, 3)];
                ++context_[s.substr(i - 2, 2)];
            }
        }
    }

    double perplexity(std::string_view text) const {
        std::string s = pad(text);
        double v = static_cast<double>(vocab_.size() + 1);
        double logp = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 2; i < s.size(); ++i, ++n) {
            auto c3 = counts_.find(s.substr(i - 2, 3));
            auto c2 = context_.find(s.substr(i - 2, 2));
            double num = (c3 == counts_.end() ? 0.0 : c3->second) + k_;
            double den = (c2 == context_.end() ? 0.0 : c2->second) + k_ * v;
            logp += std::log(num / den);
        }
        return n ? std::exp(-logp / static_cast<double>(n)) : 1.0;
    }

  private:
    static std::string pad(std::string_view t) { return "\x02\x02" + text::to_lower(text::trim(t)) + "\x03"; }

    double k_;
    std::map<char, bool> vocab_;
    std::map<std::string, double> counts_;
    std::map<std::string, double> context_;
};

/// Surface heuristic in [0, 1]: question mark, capitalization, interrogative
/// opener and a plausible length.
inline double heuristic_well_formedness(std::string_view q) {
    static const std::array<std::string_view, 19> openers{"is", "are", "was", "were", "do", "does", "did", "can",
                                                          "could", "should", "would", "will", "what", "why", "how",
                                                          "which", "who", "when", "where"};
    auto t = text::trim(q);
    if (t.empty())
        return 0.0;
    double p = 0.2;
    if (t.back() == '?')
        p += 0.3;
    if (std::isupper(static_cast<unsigned char>(t.front())))
        p += 0.2;
    auto toks = text::alnum_tokens(t);
    if (!toks.empty() && std::find(openers.begin(), openers.end(), toks.front()) != openers.end())
        p += 0.2;
    if (toks.size() >= 4 && toks.size() <= 25)
        p += 0.1;
    return std::min(p, 1.0);
}

/// Hash embeddings with fixed well-formedness and perplexity.
class FixedScorers final : public AuxiliaryScorers {
  public:
    FixedScorers(double well_formed, double perplexity, std::size_t dim = kDefaultSentenceEmbeddingDim)
        : well_formed_(well_formed), perplexity_(perplexity), dim_(dim) {}

    std::vector<double> sentence_embed(std::string_view t) const override { return hash_sentence_embedding(t, dim_); }
    double well_formed_prob(std::string_view) const override { return well_formed_; }
    double perplexity(std::string_view) const override { return perplexity_; }

  private:
    double well_formed_;
    double perplexity_;
    std::size_t dim_;
};

/// Model-free defaults: hash embeddings, heuristic well-formedness and a
/// character trigram LM trained on hand-written questions.
class StubScorers final : public AuxiliaryScorers {
  public:
    explicit StubScorers(const std::vector<std::string> &lm_corpus, std::size_t dim = kDefaultSentenceEmbeddingDim)
        : dim_(dim) {
        lm_.train(lm_corpus);
    }

    std::vector<double> sentence_embed(std::string_view t) const override { return hash_sentence_embedding(t, dim_); }
    double well_formed_prob(std::string_view t) const override { return heuristic_well_formedness(t); }
    double perplexity(std::string_view t) const override { return lm_.perplexity(t); }

  private:
    std::size_t dim_;
    CharNgramLanguageModel lm_;
};

inline FeatureVector extract_features(std::string_view question, const QuestionCandidate &candidate,
                                      const AuxiliaryScorers &scorers) {
    FeatureVector f;
    f.sentence_embedding = scorers.sentence_embed(question);
    f.well_formedness = scorers.well_formed_prob(question);
    f.fluency = -scorers.perplexity(question);
    f.model_confidence = -candidate.confidence_loss;
    f.question_type_score = question_type_score(question);
    for (double x : f.sentence_embedding)
        if (!std::isfinite(x))
            throw BackendError("non-finite sentence embedding");
    if (!std::isfinite(f.well_formedness) || !std::isfinite(f.fluency) || !std::isfinite(f.model_confidence))
        throw BackendError("non-finite feature value");
    return f;
}

inline FeatureVector extract_features(const QuestionCandidate &candidate, const AuxiliaryScorers &scorers) {
    return extract_features(candidate.question, candidate, scorers);
}

/// Linear usefulness regressor. weights[0] is the intercept.
struct RerankerModel {
    FeatureSet feature_set = FeatureSet::ling_sbert;
    std::size_t feature_dimension = 0;
    std::vector<double> weights;
    double training_mean = 0.0;

    /// Predicts the training mean for every input.
    static RerankerModel mean_baseline(double training_mean, std::size_t feature_dimension,
                                       FeatureSet set = FeatureSet::ling_sbert) {
        RerankerModel m;
        m.feature_set = set;
        m.feature_dimension = feature_dimension;
        m.weights.assign(feature_dimension + 1, 0.0);
        m.weights[0] = training_mean;
        m.training_mean = training_mean;
        return m;
    }

    double predict(std::span<const double> x) const {
        if (x.size() != feature_dimension)
            throw ValidationError("feature dimension " + std::to_string(x.size()) + " != model dimension " +
                                  std::to_string(feature_dimension));
        double y = weights[0];
        for (std::size_t i = 0; i < x.size(); ++i)
            y += weights[i + 1] * x[i];
        return y;
    }

    void save(const std::filesystem::path &path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw StorageError("cannot write " + path.string());
        out << serialize();
    }

    std::string serialize() const {
        std::ostringstream out;
        out << "hintgen-reranker 1\n";
        out << "feature_set " << to_string(feature_set) << '\n';
        out << "feature_dimension " << feature_dimension << '\n';
        out << "training_mean " << format_double(training_mean) << '\n';
        out << "weights " << weights.size() << '\n';
        for (double w : weights)
            out << format_double(w) << '\n';
        return out.str();
    }

    static RerankerModel deserialize(std::istream &in) {
        RerankerModel m;
        std::string key, value;
        std::size_t n = 0;
        if (!(in >> key >> value) || key != "hintgen-reranker" || value != "1")
            throw ParseError("not a reranker model file");
        in >> key >> value;
        if (key != "feature_set")
            throw ParseError("expected feature_set");
        m.feature_set = feature_set_from_string(value);
        if (!(in >> key >> m.feature_dimension) || key != "feature_dimension")
            throw ParseError("expected feature_dimension");
        if (!(in >> key >> m.training_mean) || key != "training_mean")
            throw ParseError("expected training_mean");
        if (!(in >> key >> n) || key != "weights" || n != m.feature_dimension + 1)
            throw ParseError("expected " + std::to_string(m.feature_dimension + 1) + " weights");
        m.weights.resize(n);
        for (auto &w : m.weights)
            if (!(in >> w) || !std::isfinite(w))
                throw ParseError("bad weight value");
        return m;
    }

    static RerankerModel load(const std::filesystem::path &path) {
        std::ifstream in(path);
        if (!in)
            throw StorageError("cannot open " + path.string());
        return deserialize(in);
    }

  private:
    static std::string format_double(double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return buf;
    }
};

/// Least-squares fit with an unpenalized intercept: features and targets are
/// centered, the slope is the minimum-norm solution of the centered system
/// (complete orthogonal decomposition, so p > n is fine), and the intercept
/// restores the means. ridge > 0 adds a Tikhonov term on the slope.
inline RerankerModel fit_ols_dense(const std::vector<std::vector<double>> &rows, const std::vector<double> &y,
                                   double ridge = 0.0, FeatureSet set = FeatureSet::ling_sbert) {
    if (rows.size() != y.size())
        throw ValidationError("fit_ols: row and target counts differ");
    if (rows.size() < 2)
        throw ValidationError("fit_ols needs at least 2 rows");
    if (ridge < 0.0)
        throw ValidationError("ridge must be >= 0");
    const std::size_t n = rows.size(), p = rows.front().size();
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd Y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != p)
            throw ValidationError("fit_ols: inconsistent feature dimensions");
        for (std::size_t j = 0; j < p; ++j)
            X(i, j) = rows[i][j];
        Y(i) = y[i];
        if (!std::isfinite(y[i]))
            throw ValidationError("fit_ols: non-finite target");
    }
    if (!X.allFinite())
        throw ValidationError("fit_ols: non-finite feature");

    Eigen::RowVectorXd x_mean = X.colwise().mean();
    double y_mean = Y.mean();
    Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    Eigen::VectorXd Yc = Y.array() - y_mean;

    Eigen::VectorXd w;
    if (p == 0) {
        w.resize(0);
    } else if (ridge > 0.0) {
        Eigen::MatrixXd A(n + p, p);
        A << Xc, std::sqrt(ridge) * Eigen::MatrixXd::Identity(p, p);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(n + p);
        b.head(n) = Yc;
        w = A.completeOrthogonalDecomposition().solve(b);
    } else {
        w = Xc.completeOrthogonalDecomposition().solve(Yc);
    }

    RerankerModel m;
    m.feature_set = set;
    m.feature_dimension = p;
    m.training_mean = y_mean;
    m.weights.resize(p + 1);
    m.weights[0] = y_mean - (p ? x_mean.dot(w.transpose()) : 0.0);
    for (std::size_t j = 0; j < p; ++j)
        m.weights[j + 1] = w(j);
    return m;
}

inline RerankerModel fit_ols(const std::vector<std::pair<FeatureVector, double>> &rows,
                             FeatureSet set = FeatureSet::ling_sbert, double ridge = 0.0) {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    X.reserve(rows.size());
    for (const auto &[f, rating] : rows) {
        X.push_back(to_dense(f, set));
        y.push_back(rating);
    }
    return fit_ols_dense(X, y, ridge, set);
}

/// Raw regression output; not clamped to the rating scale.
inline double predict_usefulness(const RerankerModel &model, const FeatureVector &features) {
    return model.predict(to_dense(features, model.feature_set));
}

/// Index of the highest value; ties go to the lowest index.
inline std::size_t argmax_first(std::span<const double> values) {
    if (values.empty())
        throw ValidationError("argmax of an empty list");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best])
            best = i;
    return best;
}

inline std::size_t rerank_index(std::span<const QuestionCandidate> candidates, const RerankerModel &model) {
    if (candidates.empty())
        throw ValidationError("rerank needs at least one candidate");
    std::vector<double> pred;
    pred.reserve(candidates.size());
    for (const auto &c : candidates) {
        if (!c.features)
            throw ValidationError("rerank: candidate without features");
        pred.push_back(predict_usefulness(model, *c.features));
    }
    return argmax_first(pred);
}

/// Best candidate by predicted usefulness, with the prediction filled in.
inline QuestionCandidate rerank(std::span<const QuestionCandidate> candidates, const RerankerModel &model) {
    auto i = rerank_index(candidates, model);
    QuestionCandidate best = candidates[i];
    best.predicted_usefulness = predict_usefulness(model, *best.features);
    return best;
}

/// Selection over a precomputed bank using stored predictions. Candidates
/// without a prediction rank below any that have one.
inline std::size_t select_from_bank(std::span<const QuestionCandidate> bank) {
    if (bank.empty())
        throw ValidationError("empty question bank");
    std::vector<double> pred;
    for (const auto &c : bank)
        pred.push_back(c.predicted_usefulness.value_or(-std::numeric_limits<double>::infinity()));
    return argmax_first(pred);
}

} // namespace hintgen
