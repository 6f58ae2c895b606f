#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "hintgen/error_classifier.hpp"
#include "hintgen/eval.hpp"
#include "hintgen/reranker.hpp"
#include "hintgen/similarity.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace hintgen;

namespace {

std::string random_text(std::mt19937 &rng, int vocab, int max_len) {
    std::uniform_int_distribution<int> len(1, max_len), pick(0, vocab - 1);
    std::string s;
    int n = len(rng);
    for (int i = 0; i < n; ++i)
        s += (i ? " w" : "w") + std::to_string(pick(rng));
    return s;
}

std::vector<ReferenceSolution> refs(std::initializer_list<const char *> texts) {
    std::vector<ReferenceSolution> out;
    int i = 0;
    for (auto t : texts)
        out.push_back({"r" + std::to_string(i++), t, std::nullopt, {}});
    return out;
}

} // namespace

// ---- similarity -----------------------------------------------------------------

TEST(Similarity, IdentityIsOneUnderBothStubs) {
    HashEmbeddingBackend hash;
    OrthogonalEmbeddingBackend ortho;
    for (const char *t : {"Treatment A", "the cat the cat", "x", "It's a discrete variable because it counts"}) {
        auto h = token_similarity(t, t, hash);
        EXPECT_NEAR(h.precision, 1.0, 1e-6);
        EXPECT_NEAR(h.recall, 1.0, 1e-6);
        EXPECT_NEAR(h.f1, 1.0, 1e-6);
        EXPECT_NEAR(token_similarity(t, t, ortho).f1, 1.0, 1e-12);
    }
}

TEST(Similarity, HalfOverlapUnderOrthogonalStub) {
    OrthogonalEmbeddingBackend ortho;
    auto s = token_similarity("a b", "a c", ortho);
    EXPECT_DOUBLE_EQ(s.precision, 0.5);
    EXPECT_DOUBLE_EQ(s.recall, 0.5);
    EXPECT_DOUBLE_EQ(s.f1, 0.5);
    EXPECT_FALSE(is_match("a b", "a c", ortho, 0.8));
}

TEST(Similarity, DisjointIsZeroUnderOrthogonalStub) {
    OrthogonalEmbeddingBackend ortho;
    EXPECT_DOUBLE_EQ(token_similarity("a b", "c d", ortho).f1, 0.0);
}

TEST(Similarity, EmptyTextRejected) {
    HashEmbeddingBackend hash;
    EXPECT_THROW(token_similarity("", "a", hash), ValidationError);
    EXPECT_THROW(token_similarity("a", "  ", hash), ValidationError);
}

TEST(Similarity, EmptyTextMatchConvention) {
    HashEmbeddingBackend hash;
    EXPECT_TRUE(is_match("", "", hash, 0.8));
    EXPECT_FALSE(is_match("", "x", hash, 0.8));
    EXPECT_FALSE(is_match("x", "", hash, 0.8));
    EXPECT_TRUE(is_match("same words", "same words", hash, 0.8));
    EXPECT_THROW(is_match("a", "a", hash, 0.0), ValidationError);
    EXPECT_THROW(is_match("a", "a", hash, 1.5), ValidationError);
}

TEST(Similarity, OrthogonalStubAgreesWithSetOracle) {
    OrthogonalEmbeddingBackend ortho(4096);
    std::mt19937 rng(5);
    for (int i = 0; i < 500; ++i) {
        auto a = random_text(rng, 10, 8), b = random_text(rng, 10, 8);
        ASSERT_NEAR(token_similarity(a, b, ortho).f1, oracle::orthogonal_f1(a, b), 1e-12) << a << " | " << b;
    }
}

TEST(Similarity, SymmetryAndBoundsOnRandomTexts) {
    HashEmbeddingBackend hash;
    std::mt19937 rng(11);
    for (int i = 0; i < 500; ++i) {
        auto a = random_text(rng, 15, 10), b = random_text(rng, 15, 10);
        auto ab = token_similarity(a, b, hash), ba = token_similarity(b, a, hash);
        ASSERT_NEAR(ab.f1, ba.f1, 1e-12);
        ASSERT_NEAR(ab.precision, ba.recall, 1e-12);
        for (double v : {ab.precision, ab.recall, ab.f1}) {
            ASSERT_GE(v, -1.0);
            ASSERT_LE(v, 1.0);
        }
        if (ab.precision + ab.recall > 0)
            ASSERT_NEAR(ab.f1, 2 * ab.precision * ab.recall / (ab.precision + ab.recall), 1e-12);
    }
}

TEST(Similarity, HashStubVectorsAreUnitNormAndDeterministic) {
    HashEmbeddingBackend hash(256);
    auto a = hash.embed_tokens("Alpha beta, GAMMA");
    auto b = hash.embed_tokens("alpha BETA gamma");
    ASSERT_EQ(a.size(), 3u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].token, b[i].token);
        EXPECT_EQ(a[i].vector, b[i].vector);
        double n = std::sqrt(std::inner_product(a[i].vector.begin(), a[i].vector.end(), a[i].vector.begin(), 0.0));
        EXPECT_NEAR(n, 1.0, 1e-6);
        EXPECT_EQ(a[i].vector.size(), 256u);
    }
}

TEST(Similarity, IdfWeightingChangesTheMean) {
    OrthogonalEmbeddingBackend ortho;
    auto idf = IdfTable::from_documents({"a b", "a c", "a d"});
    // "a" is everywhere so it weighs less than "b"
    EXPECT_LT(idf.weight("a"), idf.weight("b"));
    auto plain = token_similarity("a b", "a c", ortho);
    auto weighted = token_similarity("a b", "a c", ortho, &idf);
    EXPECT_DOUBLE_EQ(plain.precision, 0.5);
    EXPECT_LT(weighted.precision, 0.5);
    fixtures::ScratchDir dir("idf");
    idf.save(dir / "idf.tsv");
    auto back = IdfTable::load(dir / "idf.tsv");
    EXPECT_DOUBLE_EQ(back.weight("a"), idf.weight("a"));
    EXPECT_DOUBLE_EQ(back.weight("zzz"), idf.weight("zzz"));
}

TEST(NearestReference, SingleReference) {
    HashEmbeddingBackend hash;
    auto r = refs({"only one"});
    EXPECT_EQ(&nearest_reference("anything", r, hash), &r[0]);
}

TEST(NearestReference, IdentityDominates) {
    HashEmbeddingBackend hash;
    auto r = refs({"alpha beta", "gamma delta", "the exact student text"});
    EXPECT_EQ(nearest_reference_index("the exact student text", r, hash), 2u);
}

TEST(NearestReference, TiesGoToFirst) {
    OrthogonalEmbeddingBackend ortho;
    auto r = refs({"x y", "duplicate text", "duplicate text"});
    EXPECT_EQ(nearest_reference_index("duplicate text", r, ortho), 1u);
}

TEST(NearestReference, EmptyListRejected) {
    HashEmbeddingBackend hash;
    EXPECT_THROW(nearest_reference("a", {}, hash), ValidationError);
}

TEST(NearestReference, PermutationInvariantUpToTies) {
    HashEmbeddingBackend hash;
    std::mt19937 rng(3);
    for (int it = 0; it < 200; ++it) {
        std::vector<ReferenceSolution> r;
        for (int k = 0; k < 4; ++k)
            r.push_back({"r" + std::to_string(k), random_text(rng, 12, 6), std::nullopt, {}});
        auto student = random_text(rng, 12, 6);
        auto best = nearest_reference(student, r, hash).text;
        std::shuffle(r.begin(), r.end(), rng);
        auto again = nearest_reference(student, r, hash).text;
        // distinct texts give distinct scores almost surely; equal scores
        // only come from equal texts, which compare equal anyway
        ASSERT_NEAR(token_similarity(best, student, hash).f1, token_similarity(again, student, hash).f1, 1e-12);
    }
}

// ---- classifier -----------------------------------------------------------------

TEST(Classifier, VerbatimIsNoDetectedError) {
    HashEmbeddingBackend hash;
    auto r = decompose("Treatment A, because results with higher variance are less homogeneous");
    EXPECT_EQ(classify(r, r, hash, 0.8), ErrorCategory::NoDetectedError);
}

TEST(Classifier, MissingCauseCorrectEffect) {
    HashEmbeddingBackend hash;
    auto r = decompose("Treatment A, because results with higher variance are less homogeneous");
    EXPECT_EQ(classify(decompose("Treatment A"), r, hash, 0.8), ErrorCategory::MissingCauseCorrectEffect);
}

TEST(Classifier, DisjointIsIncorrectCauseIncorrectEffect) {
    OrthogonalEmbeddingBackend ortho;
    auto r = decompose("Treatment A, because results vary more");
    EXPECT_EQ(classify(decompose("Cheaper drug, since nobody cares"), r, ortho, 0.8),
              ErrorCategory::IncorrectCauseIncorrectEffect);
    // an empty cause with a wrong effect is not "missing cause"
    EXPECT_EQ(classify(decompose("Cheaper drug"), r, ortho, 0.8), ErrorCategory::IncorrectCauseIncorrectEffect);
}

TEST(Classifier, RemainingCategories) {
    OrthogonalEmbeddingBackend ortho;
    auto r = decompose("Treatment A, because results vary more");
    EXPECT_EQ(classify(decompose("Treatment A, since nobody cares"), r, ortho, 0.8),
              ErrorCategory::IncorrectCauseCorrectEffect);
    EXPECT_EQ(classify(decompose("Cheaper drug, because results vary more"), r, ortho, 0.8),
              ErrorCategory::CorrectCauseIncorrectEffect);
}

TEST(Classifier, TruthTableOfMatchOutcomes) {
    EXPECT_EQ(category_from_matches(false, false, true), ErrorCategory::IncorrectCauseIncorrectEffect);
    EXPECT_EQ(category_from_matches(false, false, false), ErrorCategory::IncorrectCauseIncorrectEffect);
    EXPECT_EQ(category_from_matches(true, false, true), ErrorCategory::CorrectCauseIncorrectEffect);
    EXPECT_EQ(category_from_matches(false, true, false), ErrorCategory::MissingCauseCorrectEffect);
    EXPECT_EQ(category_from_matches(false, true, true), ErrorCategory::IncorrectCauseCorrectEffect);
    EXPECT_EQ(category_from_matches(true, true, true), ErrorCategory::NoDetectedError);
}

TEST(Classifier, RaisingTauNeverCreatesMatches) {
    OrthogonalEmbeddingBackend ortho(4096);
    std::mt19937 rng(17);
    auto rank = [](ErrorCategory c, bool which) {
        // cause match / effect match bits recovered from the category
        switch (c) {
        case ErrorCategory::NoDetectedError: return true;
        case ErrorCategory::CorrectCauseIncorrectEffect: return which == 0;
        case ErrorCategory::IncorrectCauseCorrectEffect:
        case ErrorCategory::MissingCauseCorrectEffect: return which == 1;
        default: return false;
        }
    };
    for (int it = 0; it < 300; ++it) {
        auto s = decompose(random_text(rng, 6, 4) + " because " + random_text(rng, 6, 5));
        auto r = decompose(random_text(rng, 6, 4) + " because " + random_text(rng, 6, 5));
        ErrorCategory prev = classify(s, r, ortho, 0.05);
        for (double tau : {0.2, 0.4, 0.6, 0.8, 1.0}) {
            auto cur = classify(s, r, ortho, tau);
            for (bool which : {false, true})
                if (rank(cur, which))
                    ASSERT_TRUE(rank(prev, which));
            prev = cur;
        }
    }
}

TEST(Classifier, MissingCauseOnlyWithoutStudentCause) {
    HashEmbeddingBackend hash;
    std::mt19937 rng(23);
    for (int it = 0; it < 300; ++it) {
        auto s = decompose(it % 2 ? random_text(rng, 5, 3) : random_text(rng, 5, 3) + " because " + random_text(rng, 5, 4));
        auto r = decompose(random_text(rng, 5, 3) + " because " + random_text(rng, 5, 4));
        if (classify(s, r, hash, 0.8) == ErrorCategory::MissingCauseCorrectEffect)
            ASSERT_FALSE(has_cause(s));
    }
}

TEST(Classifier, ReferenceWithoutEffectRejected) {
    HashEmbeddingBackend hash;
    Decomposition empty;
    EXPECT_THROW(classify(decompose("x"), empty, hash, 0.8), ValidationError);
}

// ---- reranker ------------------------------------------------------------------

TEST(QuestionType, TaxonomyScores) {
    EXPECT_EQ(question_type_score("Is flipping a coin discrete?"), 0.5);
    EXPECT_EQ(question_type_score("Is flipping a coin discrete or continuous?"), 0.8);
    EXPECT_EQ(question_type_score("What kind of action is flipping a coin?"), 1.0);
    EXPECT_EQ(question_type_score("How does variance relate to spread?"), 1.0);
    EXPECT_EQ(question_type_score("Does it go up or down?"), 0.8);
}

TEST(Features, FixedScorersContract) {
    FixedScorers scorers(0.5, 10.0, 768);
    QuestionCandidate c;
    c.question = "Is flipping a coin discrete?";
    c.confidence_loss = 0.7;
    auto f = extract_features(c, scorers);
    EXPECT_EQ(f.fluency, -10.0);
    EXPECT_EQ(f.well_formedness, 0.5);
    EXPECT_EQ(f.model_confidence, -0.7);
    EXPECT_EQ(f.question_type_score, 0.5);
    EXPECT_EQ(f.dimension(), 772u);
    EXPECT_EQ(to_dense(f).size(), 772u);
    EXPECT_EQ(to_dense(f, FeatureSet::linguistic).size(), 4u);
    EXPECT_EQ(to_dense(f, FeatureSet::sbert).size(), 768u);
}

TEST(Features, OpenEndedQuestionScoresOne) {
    FixedScorers scorers(0.5, 10.0, 16);
    QuestionCandidate c;
    c.question = "What kind of action is flipping a coin?";
    EXPECT_EQ(extract_features(c, scorers).question_type_score, 1.0);
}

TEST(Features, DistinctQuestionsGetDistinctEmbeddings) {
    StubScorers scorers({"What is a coin?", "Is it discrete?"}, 768);
    auto ann = read_jsonl<UsefulnessAnnotation>(fixtures::data_dir() / "annotations_test.jsonl");
    std::map<std::vector<double>, std::string> seen;
    for (const auto &a : ann) {
        auto e = scorers.sentence_embed(a.question);
        auto [it, inserted] = seen.emplace(e, a.question);
        if (!inserted)
            EXPECT_EQ(it->second, a.question);
        double wf = scorers.well_formed_prob(a.question);
        EXPECT_GE(wf, 0.0);
        EXPECT_LE(wf, 1.0);
        EXPECT_GT(scorers.perplexity(a.question), 0.0);
    }
}

TEST(Ols, ExactLinearRecovery) {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 10; ++i) {
        X.push_back({static_cast<double>(i) * 0.37 - 1.0});
        y.push_back(2.0 + 3.0 * X.back()[0]);
    }
    auto m = fit_ols_dense(X, y);
    for (std::size_t i = 0; i < X.size(); ++i)
        EXPECT_NEAR(m.predict(X[i]), y[i], 1e-8);
    EXPECT_NEAR(m.predict(std::vector<double>{1.0}), 5.0, 1e-8);
    EXPECT_NEAR(m.predict(std::vector<double>{0.0}), 2.0, 1e-8);
}

TEST(Ols, ConstantRatingsPredictConstant) {
    std::mt19937 rng(2);
    std::normal_distribution<double> g;
    std::vector<std::vector<double>> X(30, std::vector<double>(6));
    for (auto &r : X)
        for (auto &v : r)
            v = g(rng);
    auto m = fit_ols_dense(X, std::vector<double>(30, 3.5));
    for (int i = 0; i < 20; ++i) {
        std::vector<double> x(6);
        for (auto &v : x)
            v = 10 * g(rng);
        EXPECT_NEAR(m.predict(x), 3.5, 1e-8);
    }
    EXPECT_DOUBLE_EQ(m.training_mean, 3.5);
}

TEST(Ols, MatchesSvdPseudoinverseOracleWhenWide) {
    std::mt19937 rng(4);
    std::normal_distribution<double> g;
    const int n = 40, p = 90;
    std::vector<std::vector<double>> X(n, std::vector<double>(p));
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
        for (auto &v : X[i])
            v = g(rng);
        y[i] = 1 + std::round(4 * std::abs(g(rng)));
    }
    auto m = fit_ols_dense(X, y);
    auto w = oracle::min_norm_ols(X, y);
    ASSERT_EQ(m.weights.size(), w.size());
    for (std::size_t j = 0; j < w.size(); ++j)
        EXPECT_NEAR(m.weights[j], w[j], 1e-8);
    for (int i = 0; i < n; ++i)
        EXPECT_NEAR(m.predict(X[i]), y[i], 1e-8);
}

TEST(Ols, RidgeShrinksTheSlope) {
    std::mt19937 rng(6);
    std::normal_distribution<double> g;
    std::vector<std::vector<double>> X(20, std::vector<double>(3));
    std::vector<double> y(20);
    for (int i = 0; i < 20; ++i) {
        for (auto &v : X[i])
            v = g(rng);
        y[i] = X[i][0] - 2 * X[i][1] + 0.1 * g(rng);
    }
    auto plain = fit_ols_dense(X, y), ridge = fit_ols_dense(X, y, 5.0);
    auto slope_norm = [](const RerankerModel &m) {
        double s = 0;
        for (std::size_t j = 1; j < m.weights.size(); ++j)
            s += m.weights[j] * m.weights[j];
        return s;
    };
    EXPECT_LT(slope_norm(ridge), slope_norm(plain));
    EXPECT_THROW(fit_ols_dense(X, y, -1.0), ValidationError);
}

TEST(Ols, InputValidation) {
    EXPECT_THROW(fit_ols_dense({{1.0}}, {1.0}), ValidationError);
    EXPECT_THROW(fit_ols_dense({{1.0}, {1.0, 2.0}}, {1.0, 2.0}), ValidationError);
    EXPECT_THROW(fit_ols_dense({{1.0}, {2.0}}, {1.0}), ValidationError);
    FeatureVector a{{1.0, 2.0}, 0, 0, 0, 0}, b{{1.0}, 0, 0, 0, 0};
    EXPECT_THROW(fit_ols({{a, 1.0}, {b, 2.0}}), ValidationError);
}

TEST(Reranker, PredictionsAndPersistence) {
    auto base = RerankerModel::mean_baseline(3.42, 772);
    FeatureVector zero{std::vector<double>(768, 0.0), 0, 0, 0, 0};
    FeatureVector other{std::vector<double>(768, 0.3), 1, -5, -1, 0.8};
    EXPECT_EQ(predict_usefulness(base, zero), 3.42);
    EXPECT_EQ(predict_usefulness(base, other), 3.42);
    FeatureVector short_vec{std::vector<double>(3, 0.0), 0, 0, 0, 0};
    EXPECT_THROW(predict_usefulness(base, short_vec), ValidationError);

    RerankerModel m;
    m.feature_dimension = 2;
    m.feature_set = FeatureSet::linguistic;
    m.weights = {0.1, 1.0 / 3.0, -2e-17};
    m.training_mean = 2.9;
    std::istringstream in(m.serialize());
    auto back = RerankerModel::deserialize(in);
    EXPECT_EQ(back.weights, m.weights);
    EXPECT_EQ(back.training_mean, m.training_mean);
    EXPECT_EQ(back.feature_set, m.feature_set);
    EXPECT_EQ(back.predict(std::vector<double>{0.0, 0.0}), 0.1);
    std::istringstream bad("not a model\n");
    EXPECT_THROW(RerankerModel::deserialize(bad), ParseError);
}

namespace {

std::vector<QuestionCandidate> candidates_with(std::vector<double> first_feature) {
    std::vector<QuestionCandidate> out;
    for (double v : first_feature) {
        QuestionCandidate c;
        c.question = "q" + std::to_string(out.size()) + "?";
        c.features = FeatureVector{{v}, 0, 0, 0, 0};
        out.push_back(c);
    }
    return out;
}

RerankerModel identity_on_first() {
    RerankerModel m;
    m.feature_dimension = 5;
    m.weights = {0, 1, 0, 0, 0, 0};
    return m;
}

} // namespace

TEST(Rerank, ArgmaxWithFirstIndexTies) {
    auto m = identity_on_first();
    EXPECT_EQ(rerank_index(candidates_with({3.1}), m), 0u);
    EXPECT_EQ(rerank_index(candidates_with({3.1, 4.2, 2.0}), m), 1u);
    EXPECT_EQ(rerank_index(candidates_with({2.0, 2.0, 2.0}), m), 0u);
    auto best = rerank(candidates_with({3.1, 4.2, 2.0}), m);
    EXPECT_EQ(best.question, "q1?");
    EXPECT_EQ(best.predicted_usefulness, 4.2);
    EXPECT_THROW(rerank_index(std::vector<QuestionCandidate>{}, m), ValidationError);
}

TEST(Rerank, AddingAConstantKeepsTheChoice) {
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int it = 0; it < 200; ++it) {
        std::vector<double> v(1 + it % 6);
        for (auto &x : v)
            x = u(rng);
        auto m = identity_on_first();
        auto i = rerank_index(candidates_with(v), m);
        m.weights[0] += u(rng);
        ASSERT_EQ(rerank_index(candidates_with(v), m), i);
    }
}

TEST(Rerank, BankSelectionRanksMissingPredictionsLast) {
    std::vector<QuestionCandidate> bank(3);
    bank[0].question = "a?";
    bank[1].question = "b?";
    bank[1].predicted_usefulness = -100.0;
    bank[2].question = "c?";
    EXPECT_EQ(select_from_bank(bank), 1u);
    EXPECT_THROW(select_from_bank(std::vector<QuestionCandidate>{}), ValidationError);
}

// ---- generation metrics ---------------------------------------------------------

TEST(Bleu, IdentityIsHundredAtEveryOrder) {
    std::vector<std::string> c{"the cat sat on the mat", "a b"}, r = c;
    for (int n = 1; n <= 4; ++n)
        EXPECT_EQ(bleu(c, r, n), 100.0);
    EXPECT_EQ(rouge_l(c, r), 100.0);
}

TEST(Bleu, BrevityPenaltyHandExample) {
    double expected = 100.0 * std::exp(1.0 - 3.0 / 2.0);
    EXPECT_NEAR(bleu({"the cat"}, {"the cat sat"}, 1), expected, 1e-9);
    EXPECT_NEAR(bleu({"the cat"}, {"the cat sat"}, 1), 60.65, 0.01);
}

TEST(Bleu, DisjointIsNearZero) {
    EXPECT_LT(bleu({"a b c d"}, {"e f g h"}, 4), 1e-6);
    EXPECT_LT(bleu({"a b c d"}, {"e f g h"}, 1), 1e-6);
}

TEST(Bleu, LengthMismatchAndBadOrderRejected) {
    EXPECT_THROW(bleu({"a"}, {"a", "b"}, 1), ValidationError);
    EXPECT_THROW(bleu({}, {}, 1), ValidationError);
    EXPECT_THROW(bleu({"a"}, {"a"}, 5), ValidationError);
    EXPECT_THROW(rouge_l({"a"}, {}), ValidationError);
}

TEST(Bleu, EmptyCandidateConventions) {
    EXPECT_EQ(bleu({""}, {""}, 4), 100.0);
    EXPECT_EQ(bleu({""}, {"x"}, 4), 0.0);
}

TEST(Bleu, AgreesWithBruteForceOracle) {
    std::mt19937 rng(21);
    for (int it = 0; it < 200; ++it) {
        std::vector<std::string> c, r;
        int pairs = 1 + it % 5;
        for (int i = 0; i < pairs; ++i) {
            c.push_back(random_text(rng, 6, 9));
            r.push_back(random_text(rng, 6, 9));
        }
        for (int n = 1; n <= 4; ++n)
            ASSERT_NEAR(bleu(c, r, n), oracle::bleu(c, r, n), 1e-9);
        ASSERT_NEAR(rouge_l(c, r), oracle::rouge_l(c, r), 1e-9);
    }
}

// At corpus level a one-token candidate adds a unigram but no bigram, so the
// bigram precision can exceed the unigram precision and BLEU-2 > BLEU-1.
TEST(Bleu, NestingCanFailWithOneTokenCandidates) {
    std::vector<std::string> c{"z", "a b"}, r{"y", "a b"};
    double b1 = bleu(c, r, 1), b2 = bleu(c, r, 2);
    EXPECT_NEAR(b1, 100.0 * 2.0 / 3.0, 1e-9);
    EXPECT_NEAR(b2, 100.0 * std::sqrt(2.0 / 3.0), 1e-9);
    EXPECT_GT(b2, b1);
}

TEST(Rouge, HandExamples) {
    EXPECT_NEAR(rouge_l({"a b c"}, {"a x c"}), 66.67, 0.01);
    EXPECT_NEAR(rouge_l({"a b c"}, {"a x c"}), 200.0 / 3.0, 1e-9);
    EXPECT_EQ(rouge_l({"a b"}, {"c d"}), 0.0);
    EXPECT_EQ(rouge_l({"x y z"}, {"x y z"}), 100.0);
}

TEST(GenerationReport, FieldsFilled) {
    auto r = evaluate_generation({"the cat"}, {"the cat sat"});
    EXPECT_EQ(r.n_examples, 1u);
    EXPECT_NEAR(r.bleu1, 60.65, 0.01);
    EXPECT_GE(r.bleu1, r.bleu2);
    EXPECT_NEAR(r.rouge_l, 80.0, 1e-9);
}

// ---- regression metrics ---------------------------------------------------------

TEST(Regression, PerfectPrediction) {
    auto m = regression_metrics({1, 2, 3}, {1, 2, 3});
    EXPECT_EQ(m.mse, 0.0);
    EXPECT_EQ(m.mae, 0.0);
    ASSERT_TRUE(m.pearson);
    EXPECT_NEAR(*m.pearson, 1.0, 1e-12);
}

TEST(Regression, ConstantPredictionHasNoPearson) {
    EXPECT_FALSE(regression_metrics({3.1, 3.1, 3.1}, {1, 4, 5}).pearson);
    EXPECT_FALSE(regression_metrics({1, 4, 5}, {2, 2, 2}).pearson);
}

TEST(Regression, AffineRelationBruteForce) {
    std::vector<double> gold{1, 2, 4, 5, 3}, pred;
    for (double g : gold)
        pred.push_back(2 * g + 1);
    auto m = regression_metrics(pred, gold);
    double mse = 0, mae = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        mse += (pred[i] - gold[i]) * (pred[i] - gold[i]);
        mae += std::abs(pred[i] - gold[i]);
    }
    EXPECT_NEAR(m.mse, mse / 5, 1e-12);
    EXPECT_NEAR(m.mae, mae / 5, 1e-12);
    EXPECT_NEAR(*m.pearson, 1.0, 1e-12);
}

TEST(Regression, InputValidation) {
    EXPECT_THROW(regression_metrics({1, 2}, {1}), ValidationError);
    EXPECT_THROW(regression_metrics({1}, {1}), ValidationError);
}

// ---- usefulness -------------------------------------------------------------------

namespace {

UsefulnessGroup group_of(std::vector<double> preds, std::vector<double> gold) {
    UsefulnessGroup g;
    g.reference = "ref";
    for (std::size_t i = 0; i < preds.size(); ++i) {
        QuestionCandidate c;
        c.question = "q?";
        c.features = FeatureVector{{preds[i]}, 0, 0, 0, 0};
        g.candidates.push_back(c);
        g.gold.push_back(gold[i]);
    }
    return g;
}

} // namespace

TEST(Usefulness, HandExample) {
    EXPECT_EQ(usefulness_metric(identity_on_first(), {group_of({0.1, 0.9, 0.5}, {2, 5, 3})}), 5.0);
}

TEST(Usefulness, PerfectRankerReachesMaxAndBoundsOthers) {
    std::mt19937 rng(12);
    std::uniform_int_distribution<int> rating(1, 5);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<UsefulnessGroup> oracle_groups, noisy_groups;
    double max_mean = 0;
    for (int gi = 0; gi < 30; ++gi) {
        std::vector<double> gold, noisy;
        for (int k = 0; k < 4; ++k) {
            gold.push_back(rating(rng));
            noisy.push_back(u(rng));
        }
        max_mean += *std::max_element(gold.begin(), gold.end());
        oracle_groups.push_back(group_of(gold, gold));
        noisy_groups.push_back(group_of(noisy, gold));
    }
    auto m = identity_on_first();
    EXPECT_DOUBLE_EQ(usefulness_metric(m, oracle_groups), max_mean / 30);
    EXPECT_LE(usefulness_metric(m, noisy_groups), usefulness_metric(m, oracle_groups));
}

TEST(Usefulness, MeanBaselinePicksFirstCandidate) {
    auto base = RerankerModel::mean_baseline(3.0, 5);
    std::vector<UsefulnessGroup> groups{group_of({0.1, 0.9}, {2, 5}), group_of({0.7, 0.2, 0.3}, {4, 1, 1})};
    EXPECT_EQ(usefulness_metric(base, groups), 3.0);
}

TEST(Usefulness, MissingGoldRejected) {
    auto g = group_of({0.9, 0.1}, {2, 5});
    g.gold[0] = std::nullopt;
    EXPECT_THROW(usefulness_metric(identity_on_first(), {g}), ValidationError);
    g.gold.pop_back();
    EXPECT_THROW(usefulness_metric(identity_on_first(), {g}), ValidationError);
    EXPECT_THROW(usefulness_metric(identity_on_first(), {}), ValidationError);
}

TEST(Usefulness, GroupingKeepsFirstAppearanceOrder) {
    FixedScorers scorers(0.5, 10, 8);
    std::vector<UsefulnessAnnotation> ann{{"1", "r2", "a?", 3, 0.1}, {"2", "r1", "b?", 4, 0.2}, {"3", "r2", "c?", 5, 0.3}};
    auto groups = group_annotations(ann, scorers);
    ASSERT_EQ(groups.size(), 2u);
    EXPECT_EQ(groups[0].reference, "r2");
    EXPECT_EQ(groups[0].candidates.size(), 2u);
    EXPECT_EQ(groups[0].gold[1], 5.0);
    EXPECT_EQ(groups[0].candidates[1].features->model_confidence, -0.3);
}

// ---- learning gain ------------------------------------------------------------------

namespace {

InteractionRecord rec(std::string session, int attempt, bool ok, bool feedback,
                      FeedbackModel m = FeedbackModel::question_based, std::string exercise = "ex") {
    return {std::move(session), std::move(exercise), "answer", feedback ? std::optional<std::string>("fb") : std::nullopt,
            ok, attempt, m, 0};
}

} // namespace

TEST(LearningGain, AllNextAttemptsCorrect) {
    std::vector<InteractionRecord> log{rec("a", 1, false, true), rec("a", 2, true, false), rec("b", 1, false, true),
                                       rec("b", 2, true, false)};
    auto g = learning_gain(log, FeedbackModel::question_based, GainScope::all_attempts);
    EXPECT_EQ(g.gain, 100.0);
    EXPECT_EQ(g.ci95_half_width, 0.0);
}

TEST(LearningGain, TenEventsFourSuccesses) {
    std::vector<InteractionRecord> log;
    for (int i = 0; i < 10; ++i) {
        auto s = "s" + std::to_string(i);
        log.push_back(rec(s, 1, false, true));
        log.push_back(rec(s, 2, i < 4, i >= 4));
    }
    auto g = learning_gain(log, FeedbackModel::question_based, GainScope::all_attempts);
    EXPECT_EQ(g.n, 10u);
    EXPECT_EQ(g.numerator, 4u);
    EXPECT_DOUBLE_EQ(g.gain, 40.0);
    EXPECT_NEAR(g.ci95_half_width, 100 * 1.96 * std::sqrt(0.4 * 0.6 / 10), 1e-9);
    EXPECT_NEAR(g.ci95_half_width, 30.4, 0.05);
}

TEST(LearningGain, FirstAttemptDropsEventWithTwoPriorFailures) {
    std::vector<InteractionRecord> log{rec("a", 1, false, true), rec("a", 2, false, true), rec("a", 3, true, false),
                                       rec("b", 1, false, true), rec("b", 2, true, false)};
    auto all = learning_gain(log, FeedbackModel::question_based, GainScope::all_attempts);
    auto first = learning_gain(log, FeedbackModel::question_based, GainScope::first_attempt);
    EXPECT_EQ(all.n, 3u);
    EXPECT_EQ(first.n, 2u);
    EXPECT_EQ(first.numerator, 1u);
}

TEST(LearningGain, OtherModelsAndEmptyLog) {
    std::vector<InteractionRecord> log{rec("a", 1, false, true, FeedbackModel::minimal), rec("a", 2, true, false)};
    EXPECT_THROW(learning_gain(log, FeedbackModel::question_based, GainScope::all_attempts), ValidationError);
    EXPECT_EQ(learning_gain(log, FeedbackModel::minimal, GainScope::all_attempts).gain, 100.0);
    EXPECT_THROW(learning_gain({}, FeedbackModel::minimal, GainScope::first_attempt), ValidationError);
}

TEST(LearningGain, RandomLogsMatchBruteForce) {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> u(0, 1);
    const std::vector<FeedbackModel> models{FeedbackModel::minimal, FeedbackModel::question_based};
    for (int it = 0; it < 100; ++it) {
        std::vector<InteractionRecord> log;
        std::vector<oracle::Attempt> plain;
        for (int s = 0; s < 12; ++s) {
            int attempts = 1 + static_cast<int>(u(rng) * 4);
            auto model = models[s % 2];
            for (int a = 1; a <= attempts; ++a) {
                bool ok = a == attempts && u(rng) < 0.5;
                bool fb = !ok && u(rng) < 0.8;
                auto r = rec("s" + std::to_string(s), a, ok, fb, model, s % 3 ? "e1" : "e2");
                log.push_back(r);
                plain.push_back({r.session_id, r.exercise_id, a, ok, fb, std::string(to_string(model))});
            }
        }
        std::shuffle(log.begin(), log.end(), rng);
        for (auto m : models) {
            for (bool first : {false, true}) {
                auto o = oracle::learning_gain(plain, std::string(to_string(m)), first);
                auto scope = first ? GainScope::first_attempt : GainScope::all_attempts;
                if (o.events == 0) {
                    ASSERT_THROW(learning_gain(log, m, scope), ValidationError);
                    continue;
                }
                auto g = learning_gain(log, m, scope);
                ASSERT_EQ(g.n, o.events);
                ASSERT_EQ(g.numerator, o.successes);
            }
            auto all = oracle::learning_gain(plain, std::string(to_string(m)), false);
            auto first = oracle::learning_gain(plain, std::string(to_string(m)), true);
            ASSERT_GE(all.events, first.events);
        }
    }
}

TEST(LearningGain, ShippedLogHasAllFourModels) {
    auto log = read_jsonl<InteractionRecord>(fixtures::data_dir() / "interactions.jsonl");
    for (auto m : {FeedbackModel::minimal, FeedbackModel::human, FeedbackModel::non_question,
                   FeedbackModel::question_based}) {
        auto r = learning_gain_report(log, m);
        EXPECT_GE(r.n, r.n_first_attempt);
        EXPECT_GE(r.gain_all_attempts, 0.0);
        EXPECT_LE(r.gain_all_attempts, 100.0);
    }
}
