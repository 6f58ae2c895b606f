#pragma once

// Question generation: seq2seq backend contract, stub backends, candidate
// production from a reference solution and fine-tuning configuration.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hintgen/candidate.hpp"
#include "hintgen/cause_effect.hpp"
#include "hintgen/corpus.hpp"
#include "hintgen/error.hpp"
#include "hintgen/text.hpp"

namespace hintgen {

struct GeneratedText {
    std::string text;
    double score = 0.0; // model log-score, higher is better
    double loss = 0.0;  // >= 0

    bool operator==(const GeneratedText &) const = default;
};

struct TrainingPair {
    std::string id;
    std::string source;
    std::string target;

    bool operator==(const TrainingPair &) const = default;
};

struct TrainConfig {
    int epochs = 5;
    double learning_rate = 1e-5;
    int batch_size = 8;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    int max_input_tokens = 512;
    int max_output_tokens = 150;
    int beams = 3;

    void validate() const {
        if (epochs <= 0 || batch_size <= 0 || max_input_tokens <= 0 || max_output_tokens <= 0 || beams <= 0)
            throw ValidationError("train config: counts must be positive");
        if (!(learning_rate > 0.0))
            throw ValidationError("train config: learning_rate must be positive");
        if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
            throw ValidationError("train config: Adam betas must lie in (0, 1)");
    }

    bool operator==(const TrainConfig &) const = default;
};

class GeneratorBackend;

struct TrainedGenerator {
    std::shared_ptr<const GeneratorBackend> model;
    std::vector<double> validation_loss; // one entry per epoch
};

/// Seq2seq generator. generate returns at most `beams` outputs ordered by
/// score (non-increasing) and must be deterministic for a fixed state.
class GeneratorBackend {
  public:
    virtual ~GeneratorBackend() = default;

    virtual std::vector<GeneratedText> generate(std::string_view source, int beams, int max_out) const = 0;

    virtual bool supports_training() const { return false; }

    /// Returns a new trained handle; this backend is left unchanged.
    virtual TrainedGenerator fine_tune(std::span<const TrainingPair> /*train*/, std::span<const TrainingPair> /*valid*/,
                                       const TrainConfig & /*config*/) const {
        throw CapabilityError("generator backend does not support training");
    }
};

// ---- adapter wire format ------------------------------------------------------

inline void to_json(json &j, const GeneratedText &g) { j = json{{"text", g.text}, {"score", g.score}, {"loss", g.loss}}; }

inline void from_json(const json &j, GeneratedText &g) {
    j.at("text").get_to(g.text);
    g.score = j.value("score", 0.0);
    g.loss = j.value("loss", 0.0);
}

inline void to_json(json &j, const TrainingPair &p) { j = json{{"id", p.id}, {"source", p.source}, {"target", p.target}}; }

inline void from_json(const json &j, TrainingPair &p) {
    p.id = j.value("id", std::string{});
    j.at("source").get_to(p.source);
    j.at("target").get_to(p.target);
}

inline void to_json(json &j, const TrainConfig &c) {
    j = json{{"epochs", c.epochs},
             {"learning_rate", c.learning_rate},
             {"batch_size", c.batch_size},
             {"adam_beta1", c.adam_beta1},
             {"adam_beta2", c.adam_beta2},
             {"max_input_tokens", c.max_input_tokens},
             {"max_output_tokens", c.max_output_tokens},
             {"beams", c.beams}};
}

inline void from_json(const json &j, TrainConfig &c) {
    TrainConfig d;
    c.epochs = j.value("epochs", d.epochs);
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
    c.max_input_tokens = j.value("max_input_tokens", d.max_input_tokens);
    c.max_output_tokens = j.value("max_output_tokens", d.max_output_tokens);
    c.beams = j.value("beams", d.beams);
}

inline json make_generate_request(std::string_view source, int beams, int max_out) {
    return json{{"source", source}, {"beams", beams}, {"max_out", max_out}};
}

inline std::vector<GeneratedText> parse_generate_response(const json &j) {
    return j.at("candidates").get<std::vector<GeneratedText>>();
}

inline TrainingPair to_training_pair(const QGExample &x) { return {x.id, x.source, x.target}; }

inline std::vector<TrainingPair> to_training_pairs(const std::vector<QGExample> &xs) {
    std::vector<TrainingPair> out;
    out.reserve(xs.size());
    for (const auto &x : xs)
        out.push_back(to_training_pair(x));
    return out;
}

// ---- stub backends ------------------------------------------------------------------

/// "What makes {cause} true?" and four more fixed templates, in score order.
class TemplateGenerator final : public GeneratorBackend {
  public:
    std::vector<GeneratedText> generate(std::string_view source, int beams, int max_out) const override {
        static constexpr std::array<std::pair<const char *, const char *>, 5> templates{{
            {"What makes ", " true?"},
            {"Why is it the case that ", "?"},
            {"Is it true that ", "?"},
            {"Can you explain why ", "?"},
            {"What would change if it were not the case that ", "?"},
        }};
        std::string head = clause(source, max_out);
        std::vector<GeneratedText> out;
        if (head.empty())
            return out;
        int n = std::min<int>(beams, static_cast<int>(templates.size()));
        for (int i = 0; i < n; ++i) {
            double loss = 0.4 + 0.3 * i;
            out.push_back({std::string(templates[i].first) + head + templates[i].second, -loss, loss});
        }
        return out;
    }

  private:
    static std::string clause(std::string_view source, int max_out) {
        std::string_view t = text::trim(source);
        while (!t.empty() && (text::is_punct(t.back()) || text::is_space(t.back())))
            t.remove_suffix(1);
        std::string s(t);
        if (s.size() >= 2 && std::isupper(static_cast<unsigned char>(s[0])) &&
            std::islower(static_cast<unsigned char>(s[1])))
            s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
        // keep within the output budget; templates add at most 10 words
        std::size_t budget = max_out > 10 ? static_cast<std::size_t>(max_out - 10) : 1;
        std::vector<std::string> words;
        std::istringstream in(s);
        for (std::string w; in >> w && words.size() < budget;)
            words.push_back(w);
        s = text::join(words, " ");
        return s;
    }
};

/// Canned outputs keyed by a hash of the normalized source. Unknown sources
/// go to the fallback generator when one is set, else yield nothing.
class EchoGenerator final : public GeneratorBackend {
  public:
    explicit EchoGenerator(std::shared_ptr<const GeneratorBackend> fallback = nullptr) : fallback_(std::move(fallback)) {}

    void add(std::string_view source, std::vector<GeneratedText> outputs) {
        std::stable_sort(outputs.begin(), outputs.end(),
                         [](const GeneratedText &a, const GeneratedText &b) { return a.score > b.score; });
        canned_[key(source)] = std::move(outputs);
    }

    /// Lines of {"source": ..., "candidates": [{"text", "score", "loss"}]}.
    static std::shared_ptr<EchoGenerator> load(const std::filesystem::path &path,
                                               std::shared_ptr<const GeneratorBackend> fallback = nullptr) {
        auto g = std::make_shared<EchoGenerator>(std::move(fallback));
        std::ifstream in(path);
        if (!in)
            throw StorageError("cannot open " + path.string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (text::trim(line).empty())
                continue;
            try {
                auto j = json::parse(line);
                g->add(j.at("source").get<std::string>(), parse_generate_response(j));
            } catch (const json::exception &e) {
                throw ParseError(e.what(), lineno);
            }
        }
        return g;
    }

    std::vector<GeneratedText> generate(std::string_view source, int beams, int max_out) const override {
        auto it = canned_.find(key(source));
        if (it == canned_.end())
            return fallback_ ? fallback_->generate(source, beams, max_out) : std::vector<GeneratedText>{};
        std::vector<GeneratedText> out(it->second.begin(),
                                       it->second.begin() + std::min<std::size_t>(it->second.size(), beams));
        return out;
    }

  private:
    static std::uint64_t key(std::string_view source) { return text::fnv1a64(text::to_lower(text::trim(source))); }

    std::unordered_map<std::uint64_t, std::vector<GeneratedText>> canned_;
    std::shared_ptr<const GeneratorBackend> fallback_;
};

namespace detail {

inline double jaccard(const std::vector<std::string> &a, const std::vector<std::string> &b) {
    std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    if (sa.empty() && sb.empty())
        return 1.0;
    std::size_t inter = 0;
    for (const auto &t : sa)
        inter += sb.count(t);
    return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

} // namespace detail

/// Trainable stub that memorizes source -> target pairs. An exact source
/// returns its target first; other beams (and unseen sources) are the
/// targets of the most token-similar memorized sources.
class MemorizingGenerator final : public GeneratorBackend {
  public:
    MemorizingGenerator() = default;
    explicit MemorizingGenerator(std::vector<TrainingPair> table) : table_(std::move(table)) {}

    std::vector<GeneratedText> generate(std::string_view source, int beams, int /*max_out*/) const override {
        struct Hit {
            double score;
            bool exact;
            std::size_t index;
        };
        auto src_tokens = text::alnum_tokens(source);
        std::string_view src = text::trim(source);
        std::vector<Hit> hits;
        for (std::size_t i = 0; i < table_.size(); ++i) {
            bool exact = text::trim(table_[i].source) == src;
            double s = exact ? 1.0 : detail::jaccard(src_tokens, text::alnum_tokens(table_[i].source));
            hits.push_back({s, exact, i});
        }
        std::stable_sort(hits.begin(), hits.end(), [](const Hit &a, const Hit &b) {
            if (a.score != b.score)
                return a.score > b.score;
            return a.exact && !b.exact;
        });
        std::vector<GeneratedText> out;
        std::set<std::string> seen;
        for (const auto &h : hits) {
            if (static_cast<int>(out.size()) >= beams)
                break;
            const auto &target = table_[h.index].target;
            if (!seen.insert(target).second)
                continue;
            out.push_back({target, h.score, 1.0 - h.score});
        }
        return out;
    }

    bool supports_training() const override { return true; }

    TrainedGenerator fine_tune(std::span<const TrainingPair> train, std::span<const TrainingPair> valid,
                               const TrainConfig &config) const override {
        config.validate();
        auto table = table_;
        table.insert(table.end(), train.begin(), train.end());
        auto model = std::make_shared<MemorizingGenerator>(std::move(table));
        // a lookup table converges in the first epoch; report the same loss each epoch
        double loss = 0.0;
        for (const auto &v : valid) {
            auto top = model->generate(v.source, 1, config.max_output_tokens);
            double match = top.empty() ? 0.0 : detail::jaccard(text::alnum_tokens(top.front().text),
                                                                 text::alnum_tokens(v.target));
            loss += 1.0 - match;
        }
        if (!valid.empty())
            loss /= static_cast<double>(valid.size());
        return {model, std::vector<double>(static_cast<std::size_t>(config.epochs), loss)};
    }

    const std::vector<TrainingPair> &table() const { return table_; }

    void save(const std::filesystem::path &path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw StorageError("cannot write " + path.string());
        out << json{{"kind", "memorize"}, {"table", table_}}.dump() << '\n';
    }

    static std::shared_ptr<MemorizingGenerator> load(const std::filesystem::path &path) {
        std::ifstream in(path);
        if (!in)
            throw StorageError("cannot open " + path.string());
        try {
            auto j = json::parse(in);
            if (j.value("kind", std::string{}) != "memorize")
                throw ParseError("not a memorizing generator file: " + path.string());
            return std::make_shared<MemorizingGenerator>(j.at("table").get<std::vector<TrainingPair>>());
        } catch (const json::exception &e) {
            throw ParseError(e.what());
        }
    }

  private:
    std::vector<TrainingPair> table_;
};

// ---- operations ------------------------------------------------------------------------

inline Decomposition decomposition_of(const ReferenceSolution &ref) {
    return ref.decomposition ? *ref.decomposition : decompose(ref.text);
}

/// Generator input for a reference: its cause, or the full text when the
/// cause is empty.
inline std::string generation_source(const ReferenceSolution &ref) {
    auto d = decomposition_of(ref);
    return d.cause.empty() ? text::trim_copy(ref.text) : d.cause;
}

/// Up to k questions for a reference, in backend order, each ending in '?'.
inline std::vector<QuestionCandidate> generate_candidates(const ReferenceSolution &ref, const GeneratorBackend &backend,
                                                          int k, int max_out = TrainConfig{}.max_output_tokens) {
    if (k < 1)
        throw ValidationError("k must be >= 1");
    std::string source = generation_source(ref);
    auto outputs = backend.generate(source, k, max_out);
    std::vector<QuestionCandidate> out;
    for (const auto &g : outputs) {
        if (static_cast<int>(out.size()) >= k)
            break;
        if (text::trim(g.text).empty())
            continue;
        QuestionCandidate c;
        c.question = text::as_question(g.text);
        c.model_score = g.score;
        c.confidence_loss = std::max(0.0, g.loss);
        c.source = source;
        out.push_back(std::move(c));
    }
    if (out.empty())
        throw BackendError("generator produced no candidates for reference '" + ref.id + "'");
    return out;
}

inline TrainedGenerator fine_tune_qg(const Partition<QGExample> &dataset, const GeneratorBackend &backend,
                                     const TrainConfig &config) {
    if (!backend.supports_training())
        throw CapabilityError("generator backend does not support training");
    config.validate();
    if (dataset.train.empty())
        throw ValidationError("fine_tune_qg: empty train split");
    auto train = to_training_pairs(dataset.train);
    auto valid = to_training_pairs(dataset.valid);
    return backend.fine_tune(train, valid, config);
}

} // namespace hintgen
