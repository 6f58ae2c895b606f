#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hintgen/candidate.hpp"
#include "hintgen/cause_effect.hpp"
#include "hintgen/error.hpp"
#include "hintgen/text.hpp"

namespace hintgen {

struct ReferenceSolution {
    std::string id;
    std::string text;
    std::optional<Decomposition> decomposition;
    std::vector<QuestionCandidate> question_bank;

    bool operator==(const ReferenceSolution &) const = default;
};

struct Exercise {
    std::string id;
    std::string problem;
    std::vector<ReferenceSolution> references;

    bool operator==(const Exercise &) const = default;
};

enum class QuestionType { binary, binary_alternatives, open_ended };
enum class Split { train, valid, test };

struct QGExample {
    std::string id;
    std::string source;
    std::string target;
    QuestionType question_type = QuestionType::open_ended;
    std::optional<Split> split;
    std::optional<std::string> annotator;

    bool operator==(const QGExample &) const = default;
};

struct UsefulnessAnnotation {
    std::string example_id;
    std::string reference_text;
    std::string question;
    int rating = 0;
    /// Generator loss recorded when the question was produced; feeds the
    /// model-confidence feature.
    double confidence_loss = 0.0;

    bool operator==(const UsefulnessAnnotation &) const = default;
};

enum class FeedbackModel { minimal, human, non_question, question_based };

struct InteractionRecord {
    std::string session_id;
    std::string exercise_id;
    std::string student_answer;
    std::optional<std::string> feedback_shown;
    bool checker_verdict = false;
    int attempt_index = 1;
    FeedbackModel feedback_model = FeedbackModel::question_based;
    std::int64_t timestamp_ms = 0;

    bool operator==(const InteractionRecord &) const = default;
};

// ---- enum text forms ------------------------------------------------------

inline std::string_view to_string(QuestionType t) {
    switch (t) {
    case QuestionType::binary: return "binary";
    case QuestionType::binary_alternatives: return "binary_alternatives";
    case QuestionType::open_ended: return "open_ended";
    }
    return "open_ended";
}

inline std::string_view to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
    }
    return "train";
}

inline std::string_view to_string(FeedbackModel m) {
    switch (m) {
    case FeedbackModel::minimal: return "minimal";
    case FeedbackModel::human: return "human";
    case FeedbackModel::non_question: return "non_question";
    case FeedbackModel::question_based: return "question_based";
    }
    return "question_based";
}

inline QuestionType question_type_from_string(std::string_view s) {
    for (auto t : {QuestionType::binary, QuestionType::binary_alternatives, QuestionType::open_ended})
        if (to_string(t) == s)
            return t;
    throw ValidationError("unknown question_type '" + std::string(s) + "'");
}

inline Split split_from_string(std::string_view s) {
    for (auto t : {Split::train, Split::valid, Split::test})
        if (to_string(t) == s)
            return t;
    throw ValidationError("unknown split '" + std::string(s) + "'");
}

inline FeedbackModel feedback_model_from_string(std::string_view s) {
    for (auto m : {FeedbackModel::minimal, FeedbackModel::human, FeedbackModel::non_question,
                   FeedbackModel::question_based})
        if (to_string(m) == s)
            return m;
    throw ValidationError("unknown feedback_model '" + std::string(s) + "'");
}

// ---- JSON -------------------------------------------------------------------

inline void to_json(json &j, const Span &s) { j = json::array({s.begin, s.end}); }

inline void from_json(const json &j, Span &s) {
    s.begin = j.at(0).get<std::size_t>();
    s.end = j.at(1).get<std::size_t>();
    if (s.end < s.begin)
        throw ValidationError("span end before begin");
}

inline void to_json(json &j, const Decomposition &d) {
    j = json{{"cause", d.cause},
             {"effect", d.effect},
             {"connective", to_string(d.connective)},
             {"connective_text", d.connective_text},
             {"cause_span", d.cause_span},
             {"effect_span", d.effect_span},
             {"connective_span", d.connective_span}};
}

inline void from_json(const json &j, Decomposition &d) {
    j.at("cause").get_to(d.cause);
    j.at("effect").get_to(d.effect);
    d.connective = connective_from_string(j.at("connective").get<std::string>());
    d.connective_text = j.value("connective_text", std::string{});
    if (j.contains("cause_span"))
        d.cause_span = j.at("cause_span").get<Span>();
    if (j.contains("effect_span"))
        d.effect_span = j.at("effect_span").get<Span>();
    if (j.contains("connective_span"))
        d.connective_span = j.at("connective_span").get<Span>();
}

inline void to_json(json &j, const ReferenceSolution &r) {
    j = json{{"id", r.id}, {"text", r.text}};
    if (r.decomposition)
        j["decomposition"] = *r.decomposition;
    if (!r.question_bank.empty())
        j["question_bank"] = r.question_bank;
}

inline void from_json(const json &j, ReferenceSolution &r) {
    r.id = j.value("id", std::string{});
    r.text = text::trim_copy(j.at("text").get<std::string>());
    if (r.text.empty())
        throw ValidationError("reference solution text is empty");
    if (j.contains("decomposition")) {
        auto d = j.at("decomposition").get<Decomposition>();
        if (d.effect.empty())
            throw ValidationError("cached decomposition has empty effect");
        if (!text::contains_icase(r.text, text::trim(d.cause)) || !text::contains_icase(r.text, text::trim(d.effect)))
            throw ValidationError("cached decomposition does not match reference text");
        r.decomposition = std::move(d);
    }
    if (j.contains("question_bank"))
        j.at("question_bank").get_to(r.question_bank);
}

inline void to_json(json &j, const Exercise &e) {
    j = json{{"id", e.id}, {"problem", e.problem}, {"references", e.references}};
}

inline void from_json(const json &j, Exercise &e) {
    e.id = text::trim_copy(j.at("id").get<std::string>());
    e.problem = text::trim_copy(j.at("problem").get<std::string>());
    if (e.id.empty())
        throw ValidationError("exercise id is empty");
    if (e.problem.empty())
        throw ValidationError("exercise '" + e.id + "' has empty problem text");
    j.at("references").get_to(e.references);
    if (e.references.empty())
        throw ValidationError("exercise '" + e.id + "' has no reference solutions");
    for (std::size_t i = 0; i < e.references.size(); ++i)
        if (e.references[i].id.empty())
            e.references[i].id = e.id + "#" + std::to_string(i + 1);
}

inline void to_json(json &j, const QGExample &x) {
    j = json{{"id", x.id}, {"source", x.source}, {"target", x.target}, {"question_type", to_string(x.question_type)}};
    if (x.split)
        j["split"] = to_string(*x.split);
    if (x.annotator)
        j["annotator"] = *x.annotator;
}

inline void from_json(const json &j, QGExample &x) {
    x.id = j.at("id").get<std::string>();
    x.source = text::trim_copy(j.at("source").get<std::string>());
    x.target = text::trim_copy(j.at("target").get<std::string>());
    x.question_type = question_type_from_string(j.at("question_type").get<std::string>());
    if (j.contains("split"))
        x.split = split_from_string(j.at("split").get<std::string>());
    if (j.contains("annotator"))
        x.annotator = j.at("annotator").get<std::string>();
    if (x.target.empty() || x.target.back() != '?')
        throw ValidationError("QG example '" + x.id + "': target must end with '?'");
}

inline void to_json(json &j, const UsefulnessAnnotation &a) {
    j = json{{"example_id", a.example_id},
             {"reference_text", a.reference_text},
             {"question", a.question},
             {"rating", a.rating},
             {"confidence_loss", a.confidence_loss}};
}

inline void from_json(const json &j, UsefulnessAnnotation &a) {
    a.example_id = j.at("example_id").get<std::string>();
    a.reference_text = text::trim_copy(j.at("reference_text").get<std::string>());
    a.question = text::trim_copy(j.at("question").get<std::string>());
    a.rating = j.at("rating").get<int>();
    a.confidence_loss = j.value("confidence_loss", 0.0);
    if (a.rating < 1 || a.rating > 5)
        throw ValidationError("rating " + std::to_string(a.rating) + " outside [1,5]");
}

inline void to_json(json &j, const InteractionRecord &r) {
    j = json{{"session_id", r.session_id},
             {"exercise_id", r.exercise_id},
             {"student_answer", r.student_answer},
             {"checker_verdict", r.checker_verdict},
             {"attempt_index", r.attempt_index},
             {"feedback_model", to_string(r.feedback_model)},
             {"timestamp_ms", r.timestamp_ms}};
    j["feedback_shown"] = r.feedback_shown ? json(*r.feedback_shown) : json(nullptr);
}

inline void from_json(const json &j, InteractionRecord &r) {
    j.at("session_id").get_to(r.session_id);
    j.at("exercise_id").get_to(r.exercise_id);
    j.at("student_answer").get_to(r.student_answer);
    j.at("checker_verdict").get_to(r.checker_verdict);
    j.at("attempt_index").get_to(r.attempt_index);
    r.feedback_model = feedback_model_from_string(j.at("feedback_model").get<std::string>());
    r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
    if (j.contains("feedback_shown") && !j.at("feedback_shown").is_null())
        r.feedback_shown = j.at("feedback_shown").get<std::string>();
    if (r.attempt_index < 1)
        throw ValidationError("attempt_index must be >= 1");
}

// ---- line-delimited files -------------------------------------------------

/// Parses one JSON object per non-blank line. Syntax and type errors become
/// ParseError, invariant violations ValidationError; both carry the line.
template <class T>
std::vector<T> parse_jsonl(std::istream &in) {
    std::vector<T> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty())
            continue;
        try {
            out.push_back(json::parse(line).get<T>());
        } catch (const ValidationError &e) {
            throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const json::exception &e) {
            throw ParseError(e.what(), lineno);
        } catch (const ParseError &e) {
            throw ParseError(e.what(), lineno);
        }
    }
    return out;
}

template <class T>
std::vector<T> read_jsonl(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw StorageError("cannot open " + path.string());
    return parse_jsonl<T>(in);
}

template <class T>
std::string dump_jsonl(const std::vector<T> &items) {
    std::string out;
    for (const auto &item : items) {
        out += json(item).dump();
        out += '\n';
    }
    return out;
}

template <class T>
void write_jsonl(const std::filesystem::path &path, const std::vector<T> &items) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw StorageError("cannot write " + path.string());
    out << dump_jsonl(items);
    if (!out)
        throw StorageError("write failed for " + path.string());
}

inline void check_unique_ids(const std::vector<Exercise> &exercises) {
    std::set<std::string> seen;
    for (const auto &e : exercises)
        if (!seen.insert(e.id).second)
            throw ValidationError("duplicate exercise id '" + e.id + "'");
}

inline std::vector<Exercise> parse_exercises(std::istream &in) {
    auto out = parse_jsonl<Exercise>(in);
    check_unique_ids(out);
    return out;
}

inline std::vector<Exercise> load_exercises(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw StorageError("cannot open " + path.string());
    return parse_exercises(in);
}

// ---- dataset splitting --------------------------------------------------------

/// Relative partition sizes. Defaults to 220 train / 40 valid / 40 test.
struct SplitRatio {
    std::size_t train = 220;
    std::size_t valid = 40;
    std::size_t test = 40;
};

template <class T>
struct Partition {
    std::vector<T> train;
    std::vector<T> valid;
    std::vector<T> test;
};

/// Sizes for n items: valid/test get floor(n * share), at least 1 when their
/// share is non-zero; the rounding residue goes to train.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatio &ratio) {
    std::size_t total = ratio.train + ratio.valid + ratio.test;
    if (total == 0 || ratio.train == 0)
        throw ValidationError("split ratio needs a non-zero train share");
    std::size_t parts = 1 + (ratio.valid > 0) + (ratio.test > 0);
    if (n < parts)
        throw ValidationError("need at least " + std::to_string(parts) + " examples to split, got " +
                              std::to_string(n));
    auto share = [&](std::size_t r) -> std::size_t {
        if (r == 0)
            return 0;
        return std::max<std::size_t>(1, n * r / total);
    };
    std::size_t valid = share(ratio.valid);
    std::size_t test = share(ratio.test);
    return {n - valid - test, valid, test};
}

/// Seeded, platform-independent Fisher-Yates permutation of [0, n).
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

/// Disjoint, exhaustive, seed-deterministic split. Each part keeps the input order.
template <class T>
Partition<T> split_dataset(const std::vector<T> &items, std::uint64_t seed, const SplitRatio &ratio = {}) {
    auto sizes = split_sizes(items.size(), ratio);
    auto perm = seeded_permutation(items.size(), seed);
    std::array<std::vector<std::size_t>, 3> chosen;
    std::size_t k = 0;
    for (std::size_t part = 0; part < 3; ++part)
        for (std::size_t i = 0; i < sizes[part]; ++i)
            chosen[part].push_back(perm[k++]);
    Partition<T> out;
    std::array<std::vector<T> *, 3> dst{&out.train, &out.valid, &out.test};
    for (std::size_t part = 0; part < 3; ++part) {
        std::sort(chosen[part].begin(), chosen[part].end());
        for (auto i : chosen[part])
            dst[part]->push_back(items[i]);
    }
    return out;
}

inline Partition<QGExample> split_qg_dataset(const std::vector<QGExample> &examples, std::uint64_t seed,
                                             const SplitRatio &ratio = {}) {
    if (examples.size() < 3)
        throw ValidationError("split_qg_dataset needs at least 3 examples");
    auto p = split_dataset(examples, seed, ratio);
    for (auto &x : p.train)
        x.split = Split::train;
    for (auto &x : p.valid)
        x.split = Split::valid;
    for (auto &x : p.test)
        x.split = Split::test;
    return p;
}

// ---- interaction log --------------------------------------------------------------

/// Append-only interaction log, optionally backed by a JSONL file. Appends
/// are serialized; each record is written and flushed as one line.
class InteractionStore {
  public:
    InteractionStore() = default;

    explicit InteractionStore(std::filesystem::path path) : path_(std::move(path)) {
        if (std::filesystem::exists(*path_)) {
            for (auto &r : read_jsonl<InteractionRecord>(*path_)) {
                last_attempt_[{r.session_id, r.exercise_id}] =
                    std::max(last_attempt_[{r.session_id, r.exercise_id}], r.attempt_index);
                records_.push_back(std::move(r));
            }
        } else if (path_->has_parent_path()) {
            std::filesystem::create_directories(path_->parent_path());
        }
    }

    void append(const InteractionRecord &rec) {
        if (rec.attempt_index < 1)
            throw ValidationError("attempt_index must be >= 1");
        std::lock_guard lock(mu_);
        auto key = std::make_pair(rec.session_id, rec.exercise_id);
        auto it = last_attempt_.find(key);
        if (it != last_attempt_.end() && rec.attempt_index <= it->second)
            throw ValidationError("attempt_index " + std::to_string(rec.attempt_index) +
                                  " does not increase for session '" + rec.session_id + "', exercise '" +
                                  rec.exercise_id + "'");
        if (path_) {
            std::ofstream out(*path_, std::ios::binary | std::ios::app);
            std::string line = json(rec).dump() + "\n";
            out.write(line.data(), static_cast<std::streamsize>(line.size()));
            out.flush();
            if (!out)
                throw StorageError("append failed for " + path_->string());
        }
        last_attempt_[key] = rec.attempt_index;
        records_.push_back(rec);
    }

    std::vector<InteractionRecord> records() const {
        std::lock_guard lock(mu_);
        return records_;
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return records_.size();
    }

  private:
    std::optional<std::filesystem::path> path_;
    mutable std::mutex mu_;
    std::vector<InteractionRecord> records_;
    std::map<std::pair<std::string, std::string>, int> last_attempt_;
};

inline void append_interaction(InteractionStore &store, const InteractionRecord &rec) { store.append(rec); }

} // namespace hintgen
