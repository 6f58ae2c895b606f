#pragma once

// Greedy token-embedding matching (BERTScore-style) over a pluggable backend.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hintgen/corpus.hpp"
#include "hintgen/error.hpp"
#include "hintgen/text.hpp"

namespace hintgen {

struct TokenEmbedding {
    std::string token;
    std::vector<double> vector; // unit norm
};

/// Contextual token embedder. Implementations must be deterministic and
/// return unit-norm vectors of a fixed dimension.
class EmbeddingBackend {
  public:
    virtual ~EmbeddingBackend() = default;

    virtual std::vector<TokenEmbedding> embed_tokens(std::string_view text) const = 0;
    virtual std::size_t dimension() const = 0;

    /// False if concurrent embed_tokens calls are unsafe.
    virtual bool thread_safe() const { return true; }
};

/// Each lowercased alphanumeric token maps to a seeded hash vector; distinct
/// tokens are quasi-orthogonal at the default 256 dimensions.
class HashEmbeddingBackend final : public EmbeddingBackend {
  public:
    explicit HashEmbeddingBackend(std::size_t dim = 256, std::uint64_t seed = 0x5eedULL) : dim_(dim), seed_(seed) {}

    std::vector<TokenEmbedding> embed_tokens(std::string_view s) const override {
        std::vector<TokenEmbedding> out;
        for (auto &tok : text::alnum_tokens(s)) {
            auto v = text::hash_unit_vector(tok, seed_, dim_);
            out.push_back({std::move(tok), std::move(v)});
        }
        return out;
    }

    std::size_t dimension() const override { return dim_; }

  private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// Distinct tokens get distinct one-hot vectors, so cross-token cosine is
/// exactly 0. Vocabulary grows on first sight up to `capacity` tokens.
class OrthogonalEmbeddingBackend final : public EmbeddingBackend {
  public:
    explicit OrthogonalEmbeddingBackend(std::size_t capacity = 512) : capacity_(capacity) {}

    std::vector<TokenEmbedding> embed_tokens(std::string_view s) const override {
        std::vector<TokenEmbedding> out;
        std::lock_guard lock(mu_);
        for (auto &tok : text::alnum_tokens(s)) {
            auto [it, inserted] = vocab_.try_emplace(tok, vocab_.size());
            if (it->second >= capacity_) {
                vocab_.erase(it);
                throw BackendError("orthogonal backend vocabulary exhausted");
            }
            std::vector<double> v(capacity_, 0.0);
            v[it->second] = 1.0;
            out.push_back({std::move(tok), std::move(v)});
        }
        return out;
    }

    std::size_t dimension() const override { return capacity_; }

  private:
    std::size_t capacity_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::string, std::size_t> vocab_;
};

/// Serializes calls into a backend that declares single-threaded access.
class SerializedBackend final : public EmbeddingBackend {
  public:
    explicit SerializedBackend(std::shared_ptr<const EmbeddingBackend> inner) : inner_(std::move(inner)) {}

    std::vector<TokenEmbedding> embed_tokens(std::string_view s) const override {
        if (inner_->thread_safe())
            return inner_->embed_tokens(s);
        std::lock_guard lock(mu_);
        return inner_->embed_tokens(s);
    }

    std::size_t dimension() const override { return inner_->dimension(); }

  private:
    std::shared_ptr<const EmbeddingBackend> inner_;
    mutable std::mutex mu_;
};

/// Inverse document frequency weights, idf(w) = ln((N + 1) / (df(w) + 1)).
class IdfTable {
  public:
    IdfTable() = default;

    static IdfTable from_documents(const std::vector<std::string> &docs) {
        std::unordered_map<std::string, std::size_t> df;
        for (const auto &d : docs) {
            auto toks = text::alnum_tokens(d);
            std::set<std::string> uniq(toks.begin(), toks.end());
            for (const auto &t : uniq)
                ++df[t];
        }
        IdfTable t;
        double n = static_cast<double>(docs.size());
        t.default_weight_ = std::log(n + 1.0);
        for (const auto &[tok, count] : df)
            t.weights_[tok] = std::log((n + 1.0) / (static_cast<double>(count) + 1.0));
        return t;
    }

    double weight(const std::string &token) const {
        auto it = weights_.find(text::to_lower(token));
        return it == weights_.end() ? default_weight_ : it->second;
    }

    double default_weight() const { return default_weight_; }
    std::size_t size() const { return weights_.size(); }

    /// One {"token", "weight"} object per line, sorted by token; the unseen
    /// token weight is stored under the empty token.
    void save(const std::filesystem::path &path) const {
        std::vector<std::pair<std::string, double>> rows(weights_.begin(), weights_.end());
        std::sort(rows.begin(), rows.end());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw StorageError("cannot write " + path.string());
        out << json{{"token", ""}, {"weight", default_weight_}}.dump() << '\n';
        for (const auto &[tok, w] : rows)
            out << json{{"token", tok}, {"weight", w}}.dump() << '\n';
    }

    static IdfTable load(const std::filesystem::path &path) {
        std::ifstream in(path);
        if (!in)
            throw StorageError("cannot open " + path.string());
        IdfTable t;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (text::trim(line).empty())
                continue;
            try {
                auto j = json::parse(line);
                auto tok = j.at("token").get<std::string>();
                auto w = j.at("weight").get<double>();
                if (tok.empty())
                    t.default_weight_ = w;
                else
                    t.weights_[tok] = w;
            } catch (const json::exception &e) {
                throw ParseError(e.what(), lineno);
            }
        }
        return t;
    }

  private:
    std::unordered_map<std::string, double> weights_;
    double default_weight_ = 1.0;
};

struct SimilarityScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline double f1_of(double precision, double recall) {
    double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

namespace detail {

inline double cosine_unit(const std::vector<double> &a, const std::vector<double> &b) {
    double dot = 0.0;
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i)
        dot += a[i] * b[i];
    return std::clamp(dot, -1.0, 1.0);
}

// Weighted mean over `from` tokens of their best cosine against `to` tokens.
inline double greedy_match(const std::vector<TokenEmbedding> &from, const std::vector<TokenEmbedding> &to,
                           const IdfTable *idf) {
    double num = 0.0, den = 0.0;
    for (const auto &f : from) {
        double best = -1.0;
        for (const auto &t : to)
            best = std::max(best, cosine_unit(f.vector, t.vector));
        double w = idf ? idf->weight(f.token) : 1.0;
        num += w * best;
        den += w;
    }
    return den > 0.0 ? num / den : 0.0;
}

} // namespace detail

/// Score of `candidate` against `reference` from precomputed token embeddings.
inline SimilarityScore token_similarity(const std::vector<TokenEmbedding> &candidate,
                                        const std::vector<TokenEmbedding> &reference, const IdfTable *idf = nullptr) {
    if (candidate.empty() || reference.empty())
        throw ValidationError("token_similarity needs non-empty texts");
    SimilarityScore s;
    s.precision = detail::greedy_match(candidate, reference, idf);
    s.recall = detail::greedy_match(reference, candidate, idf);
    s.f1 = f1_of(s.precision, s.recall);
    return s;
}

/// Precision: mean over candidate tokens of the max cosine against reference
/// tokens. Recall: the same with roles swapped. Unweighted unless `idf` given.
inline SimilarityScore token_similarity(std::string_view candidate, std::string_view reference,
                                        const EmbeddingBackend &backend, const IdfTable *idf = nullptr) {
    if (text::trim(candidate).empty() || text::trim(reference).empty())
        throw ValidationError("token_similarity needs non-empty texts");
    return token_similarity(backend.embed_tokens(candidate), backend.embed_tokens(reference), idf);
}

/// f1 >= tau. Two empty texts match; an empty text never matches a non-empty one.
inline bool is_match(std::string_view a, std::string_view b, const EmbeddingBackend &backend, double tau,
                     const IdfTable *idf = nullptr) {
    if (!(tau > 0.0 && tau <= 1.0))
        throw ValidationError("tau must lie in (0, 1]");
    auto ea = text::trim(a).empty() ? std::vector<TokenEmbedding>{} : backend.embed_tokens(a);
    auto eb = text::trim(b).empty() ? std::vector<TokenEmbedding>{} : backend.embed_tokens(b);
    if (ea.empty() || eb.empty())
        return ea.empty() && eb.empty();
    return token_similarity(ea, eb, idf).f1 >= tau;
}

/// Index of the reference whose text scores the highest f1 against `student`;
/// ties go to the lowest index.
inline std::size_t nearest_reference_index(std::string_view student, const std::vector<ReferenceSolution> &references,
                                           const EmbeddingBackend &backend, const IdfTable *idf = nullptr) {
    if (references.empty())
        throw ValidationError("nearest_reference needs at least one reference");
    auto es = backend.embed_tokens(student);
    std::size_t best = 0;
    double best_f1 = -2.0;
    for (std::size_t i = 0; i < references.size(); ++i) {
        auto er = backend.embed_tokens(references[i].text);
        double f1 = (er.empty() || es.empty()) ? 0.0 : token_similarity(er, es, idf).f1;
        if (f1 > best_f1) {
            best_f1 = f1;
            best = i;
        }
    }
    return best;
}

inline const ReferenceSolution &nearest_reference(std::string_view student,
                                                  const std::vector<ReferenceSolution> &references,
                                                  const EmbeddingBackend &backend, const IdfTable *idf = nullptr) {
    return references[nearest_reference_index(student, references, backend, idf)];
}

} // namespace hintgen
