#pragma once

// Precomputed, re-ranked questions for every reference solution so the live
// service never calls a generator.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hintgen/corpus.hpp"
#include "hintgen/qg.hpp"
#include "hintgen/reranker.hpp"

namespace hintgen {

struct BankSkip {
    std::string exercise_id;
    std::string reference_id;
    std::string reason;
};

struct BankBuildResult {
    std::vector<Exercise> exercises;
    std::vector<BankSkip> skips;
};

/// Scores one reference's candidates in place.
inline void score_candidates(std::vector<QuestionCandidate> &candidates, const AuxiliaryScorers &scorers,
                             const RerankerModel &model) {
    for (auto &c : candidates) {
        c.features = extract_features(c, scorers);
        c.predicted_usefulness = predict_usefulness(model, *c.features);
    }
}

/// Generates and scores k candidates per reference. A reference that fails
/// is recorded in `skips` and left with an empty bank.
inline BankBuildResult build_question_bank(std::vector<Exercise> corpus, const GeneratorBackend &backend,
                                           const AuxiliaryScorers &scorers, const RerankerModel &model, int k = 3) {
    BankBuildResult result;
    for (auto &ex : corpus) {
        for (auto &ref : ex.references) {
            ref.question_bank.clear();
            try {
                auto cands = generate_candidates(ref, backend, k);
                score_candidates(cands, scorers, model);
                ref.question_bank = std::move(cands);
            } catch (const std::exception &e) {
                result.skips.push_back({ex.id, ref.id, e.what()});
            }
        }
    }
    result.exercises = std::move(corpus);
    return result;
}

struct BankRecord {
    std::string exercise_id;
    std::string reference_id;
    int rank = 0;
    QuestionCandidate candidate;
};

inline void to_json(json &j, const BankRecord &r) {
    j = r.candidate;
    j["exercise_id"] = r.exercise_id;
    j["reference_id"] = r.reference_id;
    j["rank"] = r.rank;
}

inline void from_json(const json &j, BankRecord &r) {
    j.at("exercise_id").get_to(r.exercise_id);
    j.at("reference_id").get_to(r.reference_id);
    j.at("rank").get_to(r.rank);
    r.candidate = j.get<QuestionCandidate>();
}

/// One record per (reference_id, rank), in corpus order.
inline std::vector<BankRecord> bank_records(const std::vector<Exercise> &exercises) {
    std::vector<BankRecord> out;
    for (const auto &ex : exercises)
        for (const auto &ref : ex.references)
            for (std::size_t i = 0; i < ref.question_bank.size(); ++i)
                out.push_back({ex.id, ref.id, static_cast<int>(i), ref.question_bank[i]});
    return out;
}

inline void write_question_bank(const std::filesystem::path &path, const std::vector<Exercise> &exercises) {
    write_jsonl(path, bank_records(exercises));
}

/// Replaces each reference's bank with the records stored for its id.
inline void attach_question_bank(std::vector<Exercise> &exercises, const std::vector<BankRecord> &records) {
    std::map<std::string, std::vector<BankRecord>> by_ref;
    for (const auto &r : records)
        by_ref[r.reference_id].push_back(r);
    for (auto &ex : exercises) {
        for (auto &ref : ex.references) {
            auto it = by_ref.find(ref.id);
            if (it == by_ref.end())
                continue;
            auto rows = it->second;
            std::stable_sort(rows.begin(), rows.end(),
                             [](const BankRecord &a, const BankRecord &b) { return a.rank < b.rank; });
            ref.question_bank.clear();
            for (auto &r : rows)
                ref.question_bank.push_back(std::move(r.candidate));
        }
    }
}

inline void load_question_bank(const std::filesystem::path &path, std::vector<Exercise> &exercises) {
    attach_question_bank(exercises, read_jsonl<BankRecord>(path));
}

} // namespace hintgen
