#pragma once

// Generation metrics (BLEU, ROUGE-L), regression metrics, the re-ranking
// usefulness metric and learning gains from interaction logs.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "hintgen/corpus.hpp"
#include "hintgen/error.hpp"
#include "hintgen/reranker.hpp"
#include "hintgen/text.hpp"

namespace hintgen {

// ---- generation ---------------------------------------------------------------------------

namespace detail {

inline void check_parallel(std::size_t a, std::size_t b) {
    if (a != b)
        throw ValidationError("candidate/reference length mismatch: " + std::to_string(a) + " vs " +
                              std::to_string(b));
    if (a == 0)
        throw ValidationError("empty evaluation corpus");
}

inline std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string> &toks, int n) {
    std::map<std::vector<std::string>, int> out;
    if (static_cast<int>(toks.size()) < n)
        return out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
        ++out[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    return out;
}

inline std::size_t lcs_length(const std::vector<std::string> &a, const std::vector<std::string> &b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

} // namespace detail

inline constexpr double kBleuEpsilon = 1e-9;

/// Corpus-level BLEU on lowercase alphanumeric tokens, scaled to [0, 100].
/// Zero clipped matches count as precision 1e-9. Orders for which the
/// candidates contain no n-grams at all are left out of the geometric mean.
inline double bleu(const std::vector<std::string> &candidates, const std::vector<std::string> &references,
                   int max_n = 4) {
    detail::check_parallel(candidates.size(), references.size());
    if (max_n < 1 || max_n > 4)
        throw ValidationError("max_n must lie in 1..4");

    std::vector<double> matches(max_n, 0.0), totals(max_n, 0.0);
    double c = 0, r = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto ct = text::alnum_tokens(candidates[i]);
        auto rt = text::alnum_tokens(references[i]);
        c += static_cast<double>(ct.size());
        r += static_cast<double>(rt.size());
        for (int n = 1; n <= max_n; ++n) {
            auto cc = detail::ngram_counts(ct, n);
            auto rc = detail::ngram_counts(rt, n);
            for (const auto &[g, cnt] : cc) {
                totals[n - 1] += cnt;
                auto it = rc.find(g);
                if (it != rc.end())
                    matches[n - 1] += std::min(cnt, it->second);
            }
        }
    }
    if (c == 0)
        return r == 0 ? 100.0 : 0.0;

    double log_sum = 0;
    int orders = 0;
    for (int n = 0; n < max_n; ++n) {
        if (totals[n] == 0)
            continue;
        double p = matches[n] > 0 ? matches[n] / totals[n] : kBleuEpsilon;
        log_sum += std::log(p);
        ++orders;
    }
    double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return 100.0 * bp * std::exp(log_sum / orders);
}

/// Mean per-pair LCS F-measure (beta = 1), scaled to [0, 100].
inline double rouge_l(const std::vector<std::string> &candidates, const std::vector<std::string> &references) {
    detail::check_parallel(candidates.size(), references.size());
    double sum = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto ct = text::alnum_tokens(candidates[i]);
        auto rt = text::alnum_tokens(references[i]);
        if (ct.empty() || rt.empty()) {
            sum += ct.empty() && rt.empty() ? 1.0 : 0.0;
            continue;
        }
        double lcs = static_cast<double>(detail::lcs_length(ct, rt));
        if (lcs == 0)
            continue;
        double p = lcs / ct.size(), rr = lcs / rt.size();
        sum += 2 * p * rr / (p + rr);
    }
    return 100.0 * sum / static_cast<double>(candidates.size());
}

struct GenEvalReport {
    double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
    double rouge_l = 0;
    std::size_t n_examples = 0;
};

inline void to_json(json &j, const GenEvalReport &r) {
    j = json{{"bleu1", r.bleu1}, {"bleu2", r.bleu2}, {"bleu3", r.bleu3},
             {"bleu4", r.bleu4}, {"rouge_l", r.rouge_l}, {"n_examples", r.n_examples}};
}

inline GenEvalReport evaluate_generation(const std::vector<std::string> &candidates,
                                         const std::vector<std::string> &references) {
    GenEvalReport r;
    r.bleu1 = bleu(candidates, references, 1);
    r.bleu2 = bleu(candidates, references, 2);
    r.bleu3 = bleu(candidates, references, 3);
    r.bleu4 = bleu(candidates, references, 4);
    r.rouge_l = hintgen::rouge_l(candidates, references);
    r.n_examples = candidates.size();
    return r;
}

// ---- regression -------------------------------------------------------------------------

struct RegressionMetrics {
    double mse = 0;
    double mae = 0;
    /// Absent when either side is constant.
    std::optional<double> pearson;
};

inline void to_json(json &j, const RegressionMetrics &m) {
    j = json{{"mse", m.mse}, {"mae", m.mae}};
    j["pearson"] = m.pearson ? json(*m.pearson) : json(nullptr);
}

inline RegressionMetrics regression_metrics(const std::vector<double> &predicted, const std::vector<double> &gold) {
    if (predicted.size() != gold.size())
        throw ValidationError("predicted/gold length mismatch");
    if (predicted.size() < 2)
        throw ValidationError("regression metrics need at least two points");
    const double n = static_cast<double>(gold.size());
    RegressionMetrics m;
    double mp = 0, mg = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        double d = predicted[i] - gold[i];
        m.mse += d * d;
        m.mae += std::abs(d);
        mp += predicted[i];
        mg += gold[i];
    }
    m.mse /= n;
    m.mae /= n;
    mp /= n;
    mg /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        sxy += (predicted[i] - mp) * (gold[i] - mg);
        sxx += (predicted[i] - mp) * (predicted[i] - mp);
        syy += (gold[i] - mg) * (gold[i] - mg);
    }
    auto constant = [](const std::vector<double> &v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    };
    if (!constant(predicted) && !constant(gold) && sxx > 0 && syy > 0)
        m.pearson = sxy / std::sqrt(sxx * syy);
    return m;
}

// ---- usefulness --------------------------------------------------------------------------

/// Candidates generated for one reference, each with its gold rating.
struct UsefulnessGroup {
    std::string reference;
    std::vector<QuestionCandidate> candidates; // features required
    std::vector<std::optional<double>> gold;
};

/// Gold rating of the argmax-predicted candidate, averaged over groups.
inline double usefulness_metric(const RerankerModel &model, const std::vector<UsefulnessGroup> &groups) {
    if (groups.empty())
        throw ValidationError("usefulness metric needs at least one group");
    double sum = 0;
    for (const auto &g : groups) {
        if (g.candidates.empty())
            throw ValidationError("empty candidate group for '" + g.reference + "'");
        if (g.gold.size() != g.candidates.size())
            throw ValidationError("gold ratings missing for '" + g.reference + "'");
        auto best = rerank_index(g.candidates, model);
        if (!g.gold[best])
            throw ValidationError("gold rating missing for a candidate of '" + g.reference + "'");
        sum += *g.gold[best];
    }
    return sum / static_cast<double>(groups.size());
}

/// Annotations grouped by reference text in order of first appearance,
/// features extracted with `scorers`.
inline std::vector<UsefulnessGroup> group_annotations(const std::vector<UsefulnessAnnotation> &annotations,
                                                     const AuxiliaryScorers &scorers) {
    std::vector<UsefulnessGroup> groups;
    std::map<std::string, std::size_t> index;
    for (const auto &a : annotations) {
        auto [it, inserted] = index.try_emplace(a.reference_text, groups.size());
        if (inserted)
            groups.push_back({a.reference_text, {}, {}});
        auto &g = groups[it->second];
        QuestionCandidate c;
        c.question = a.question;
        c.confidence_loss = a.confidence_loss;
        c.features = extract_features(c, scorers);
        g.candidates.push_back(std::move(c));
        g.gold.push_back(static_cast<double>(a.rating));
    }
    return groups;
}

// ---- learning gains ------------------------------------------------------------------------

enum class GainScope { first_attempt, all_attempts };

struct LearningGainResult {
    double gain = 0;            // percentage
    double ci95_half_width = 0; // percentage points
    std::size_t numerator = 0;
    std::size_t n = 0;
};

struct LearningGainReport {
    FeedbackModel model = FeedbackModel::question_based;
    double gain_first_attempt = 0;
    double gain_all_attempts = 0;
    double ci95_half_width = 0; // all attempts
    double ci95_half_width_first_attempt = 0;
    std::size_t n = 0; // all attempts
    std::size_t n_first_attempt = 0;
};

inline void to_json(json &j, const LearningGainReport &r) {
    j = json{{"model", to_string(r.model)},
             {"gain_first_attempt", r.gain_first_attempt},
             {"gain_all_attempts", r.gain_all_attempts},
             {"ci95_half_width", r.ci95_half_width},
             {"ci95_half_width_first_attempt", r.ci95_half_width_first_attempt},
             {"n", r.n},
             {"n_first_attempt", r.n_first_attempt}};
}

/// A feedback event is an incorrect attempt of `model` after which feedback
/// was shown. It counts as a success when the next attempt on the same
/// (session, exercise) is correct; events with no next attempt are left out.
/// first_attempt keeps only events on the first attempt of the exercise.
inline LearningGainResult learning_gain(const std::vector<InteractionRecord> &records, FeedbackModel model,
                                        GainScope scope) {
    std::map<std::pair<std::string, std::string>, std::vector<const InteractionRecord *>> threads;
    for (const auto &r : records)
        threads[{r.session_id, r.exercise_id}].push_back(&r);

    LearningGainResult out;
    for (auto &[key, recs] : threads) {
        std::stable_sort(recs.begin(), recs.end(), [](const InteractionRecord *a, const InteractionRecord *b) {
            return a->attempt_index < b->attempt_index;
        });
        for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
            const auto &r = *recs[i];
            if (r.checker_verdict || !r.feedback_shown || r.feedback_model != model)
                continue;
            if (scope == GainScope::first_attempt && i != 0)
                continue;
            ++out.n;
            if (recs[i + 1]->checker_verdict)
                ++out.numerator;
        }
    }
    if (out.n == 0)
        throw ValidationError("no feedback events for model '" + std::string(to_string(model)) + "'");
    double p = static_cast<double>(out.numerator) / static_cast<double>(out.n);
    out.gain = 100.0 * p;
    out.ci95_half_width = 100.0 * 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(out.n));
    return out;
}

inline LearningGainReport learning_gain_report(const std::vector<InteractionRecord> &records, FeedbackModel model) {
    auto all = learning_gain(records, model, GainScope::all_attempts);
    auto first = learning_gain(records, model, GainScope::first_attempt);
    LearningGainReport r;
    r.model = model;
    r.gain_all_attempts = all.gain;
    r.ci95_half_width = all.ci95_half_width;
    r.n = all.n;
    r.gain_first_attempt = first.gain;
    r.ci95_half_width_first_attempt = first.ci95_half_width;
    r.n_first_attempt = first.n;
    return r;
}

} // namespace hintgen
