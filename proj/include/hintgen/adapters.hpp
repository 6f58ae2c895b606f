#pragma once

// JSON-over-HTTP adapters for externally hosted models. Each adapter talks
// to one base URL such as "http://127.0.0.1:8500".
//
//   POST /embed        {"text"}                        -> {"tokens": [{"token", "vector"}]}
//   POST /generate     {"source", "beams", "max_out"}  -> {"candidates": [{"text", "score", "loss"}]}
//   POST /fine_tune    {"train", "valid", "config"}    -> {"model_id", "validation_loss"}
//   POST /entailment   {"premise", "hypothesis"}       -> {"probability"}
//   POST /score        {"text"}                        -> {"embedding", "well_formed", "perplexity"}
//
// Requests to a fine-tuned generator carry its "model_id".

#include <cmath>
#include <string>
#include <string_view>
#include <utility>

// Eigen must precede httplib: <resolv.h> defines a macro named _res.
#include <Eigen/Dense>
#include <httplib.h>

#include "hintgen/hintqa.hpp"
#include "hintgen/qg.hpp"
#include "hintgen/reranker.hpp"
#include "hintgen/similarity.hpp"

namespace hintgen {

/// Stateless JSON POST helper; a fresh connection per call keeps adapters
/// safe to share between threads.
class JsonEndpoint {
  public:
    explicit JsonEndpoint(std::string base_url, int timeout_seconds = 30)
        : base_(std::move(base_url)), timeout_(timeout_seconds) {
        if (base_.rfind("http://", 0) != 0 && base_.rfind("https://", 0) != 0)
            throw ConfigError("adapter endpoint must start with http:// or https://: '" + base_ + "'");
        while (!base_.empty() && base_.back() == '/')
            base_.pop_back();
    }

    const std::string &base_url() const { return base_; }

    json post(const std::string &path, const json &body) const {
        httplib::Client cli(base_);
        cli.set_connection_timeout(timeout_);
        cli.set_read_timeout(timeout_);
        auto res = cli.Post(path, body.dump(), "application/json");
        if (!res)
            throw BackendError("POST " + base_ + path + " failed: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw BackendError("POST " + base_ + path + " returned HTTP " + std::to_string(res->status));
        try {
            return json::parse(res->body);
        } catch (const json::exception &e) {
            throw BackendError("POST " + base_ + path + ": malformed JSON response: " + e.what());
        }
    }

  private:
    std::string base_;
    int timeout_;
};

class HttpEmbeddingBackend final : public EmbeddingBackend {
  public:
    HttpEmbeddingBackend(std::string base_url, std::size_t dimension)
        : endpoint_(std::move(base_url)), dim_(dimension) {}

    std::vector<TokenEmbedding> embed_tokens(std::string_view s) const override {
        auto j = endpoint_.post("/embed", json{{"text", s}});
        std::vector<TokenEmbedding> out;
        try {
            for (const auto &t : j.at("tokens")) {
                TokenEmbedding e{t.at("token").get<std::string>(), t.at("vector").get<std::vector<double>>()};
                if (e.vector.size() != dim_)
                    throw BackendError("embedding dimension " + std::to_string(e.vector.size()) + " != " +
                                       std::to_string(dim_));
                double n2 = 0;
                for (double x : e.vector)
                    n2 += x * x;
                if (!(n2 > 0) || !std::isfinite(n2))
                    throw BackendError("zero or non-finite embedding for token '" + e.token + "'");
                for (double &x : e.vector)
                    x /= std::sqrt(n2);
                out.push_back(std::move(e));
            }
        } catch (const json::exception &e) {
            throw BackendError(std::string("/embed: ") + e.what());
        }
        return out;
    }

    std::size_t dimension() const override { return dim_; }

  private:
    JsonEndpoint endpoint_;
    std::size_t dim_;
};

class HttpGeneratorBackend final : public GeneratorBackend {
  public:
    explicit HttpGeneratorBackend(std::string base_url, std::string model_id = {})
        : endpoint_(std::move(base_url)), model_id_(std::move(model_id)) {}

    std::vector<GeneratedText> generate(std::string_view source, int beams, int max_out) const override {
        auto req = make_generate_request(source, beams, max_out);
        if (!model_id_.empty())
            req["model_id"] = model_id_;
        auto j = endpoint_.post("/generate", req);
        try {
            auto out = parse_generate_response(j);
            if (static_cast<int>(out.size()) > beams)
                out.resize(static_cast<std::size_t>(beams));
            return out;
        } catch (const json::exception &e) {
            throw BackendError(std::string("/generate: ") + e.what());
        }
    }

    bool supports_training() const override { return true; }

    TrainedGenerator fine_tune(std::span<const TrainingPair> train, std::span<const TrainingPair> valid,
                               const TrainConfig &config) const override {
        config.validate();
        json req{{"train", std::vector<TrainingPair>(train.begin(), train.end())},
                 {"valid", std::vector<TrainingPair>(valid.begin(), valid.end())},
                 {"config", config}};
        if (!model_id_.empty())
            req["base_model_id"] = model_id_;
        auto j = endpoint_.post("/fine_tune", req);
        try {
            return {std::make_shared<HttpGeneratorBackend>(endpoint_.base_url(), j.at("model_id").get<std::string>()),
                    j.value("validation_loss", std::vector<double>{})};
        } catch (const json::exception &e) {
            throw BackendError(std::string("/fine_tune: ") + e.what());
        }
    }

    const std::string &model_id() const { return model_id_; }

  private:
    JsonEndpoint endpoint_;
    std::string model_id_;
};

class HttpNLIBackend final : public NLIBackend {
  public:
    explicit HttpNLIBackend(std::string base_url) : endpoint_(std::move(base_url)) {}

    double entailment_prob(std::string_view premise, std::string_view hypothesis) const override {
        auto j = endpoint_.post("/entailment", json{{"premise", premise}, {"hypothesis", hypothesis}});
        double p = 0;
        try {
            p = j.at("probability").get<double>();
        } catch (const json::exception &e) {
            throw BackendError(std::string("/entailment: ") + e.what());
        }
        if (!(p >= 0.0 && p <= 1.0))
            throw BackendError("/entailment: probability outside [0, 1]");
        return p;
    }

  private:
    JsonEndpoint endpoint_;
};

class HttpScorers final : public AuxiliaryScorers {
  public:
    explicit HttpScorers(std::string base_url) : endpoint_(std::move(base_url)) {}

    std::vector<double> sentence_embed(std::string_view s) const override {
        return field(s, "embedding").get<std::vector<double>>();
    }
    double well_formed_prob(std::string_view s) const override { return field(s, "well_formed").get<double>(); }
    double perplexity(std::string_view s) const override { return field(s, "perplexity").get<double>(); }

  private:
    json field(std::string_view s, const char *name) const {
        auto j = endpoint_.post("/score", json{{"text", s}});
        if (!j.contains(name))
            throw BackendError(std::string("/score: missing field '") + name + "'");
        return j.at(name);
    }

    JsonEndpoint endpoint_;
};

} // namespace hintgen
