#pragma once

// Shared fixtures: data paths, scratch directories, golden loaders and
// instrumented fakes for the backend contracts.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "hintgen/corpus.hpp"
#include "hintgen/feedback.hpp"
#include "hintgen/hintqa.hpp"
#include "hintgen/qg.hpp"

namespace fixtures {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline fs::path source_dir() { return HINTGEN_SOURCE_DIR; }
inline fs::path data_dir() { return source_dir() / "data"; }
inline fs::path golden_dir() { return HINTGEN_TEST_DATA; }

/// Fresh directory removed on destruction.
class ScratchDir {
  public:
    explicit ScratchDir(const std::string &tag) {
        static std::atomic<int> counter{0};
        path_ = fs::path(HINTGEN_SCRATCH_DIR) / (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir &) = delete;
    ScratchDir &operator=(const ScratchDir &) = delete;

    const fs::path &path() const { return path_; }
    fs::path operator/(const std::string &name) const { return path_ / name; }

  private:
    fs::path path_;
};

inline std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path &p, const std::string &content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

struct CauseEffectGolden {
    std::string group, text, effect, cause, connective;
};

inline std::vector<CauseEffectGolden> cause_effect_goldens() {
    std::vector<CauseEffectGolden> out;
    std::ifstream in(golden_dir() / "cause_effect_goldens.jsonl");
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        auto j = json::parse(line);
        out.push_back({j["group"], j["text"], j["effect"], j["cause"], j["connective"]});
    }
    return out;
}

struct FeedbackGolden {
    std::string name, student, category, kind, text, followup;
    std::optional<std::pair<std::string, std::string>> mcq_options;
};

struct FeedbackGoldens {
    hintgen::Exercise exercise;
    std::vector<FeedbackGolden> cases;
};

inline FeedbackGoldens feedback_goldens() {
    std::ifstream in(golden_dir() / "feedback_goldens.json");
    auto j = json::parse(in);
    FeedbackGoldens g;
    g.exercise = j["exercise"].get<hintgen::Exercise>();
    for (const auto &c : j["cases"]) {
        FeedbackGolden f{c["name"], c["student"], c["category"], c["kind"], c["text"], c["followup"], std::nullopt};
        if (!c["mcq_options"].is_null())
            f.mcq_options = std::make_pair(c["mcq_options"][0].get<std::string>(), c["mcq_options"][1].get<std::string>());
        g.cases.push_back(std::move(f));
    }
    return g;
}

/// Wraps a generator and records every source it is asked about.
class RecordingGenerator final : public hintgen::GeneratorBackend {
  public:
    explicit RecordingGenerator(std::shared_ptr<const hintgen::GeneratorBackend> inner) : inner_(std::move(inner)) {}

    std::vector<hintgen::GeneratedText> generate(std::string_view source, int beams, int max_out) const override {
        calls.push_back({std::string(source), beams});
        return inner_->generate(source, beams, max_out);
    }

    struct Call {
        std::string source;
        int beams;
    };
    mutable std::vector<Call> calls;

  private:
    std::shared_ptr<const hintgen::GeneratorBackend> inner_;
};

/// Fixed outputs for every source.
class ConstantGenerator final : public hintgen::GeneratorBackend {
  public:
    explicit ConstantGenerator(std::vector<hintgen::GeneratedText> outputs) : outputs_(std::move(outputs)) {}

    std::vector<hintgen::GeneratedText> generate(std::string_view, int beams, int) const override {
        std::vector<hintgen::GeneratedText> out;
        for (const auto &o : outputs_)
            if (static_cast<int>(out.size()) < beams)
                out.push_back(o);
        return out;
    }

  private:
    std::vector<hintgen::GeneratedText> outputs_;
};

/// Entailment probabilities looked up by premise, then passed through `f`.
class TableNLI final : public hintgen::NLIBackend {
  public:
    TableNLI(std::map<std::string, double> table, std::function<double(double)> f = nullptr)
        : table_(std::move(table)), f_(std::move(f)) {}

    double entailment_prob(std::string_view premise, std::string_view) const override {
        double p = table_.at(std::string(premise));
        return f_ ? f_(p) : p;
    }

  private:
    std::map<std::string, double> table_;
    std::function<double(double)> f_;
};

/// Checker that records every answer it judges; correct iff the answer is in `accepted`.
class RecordingChecker final : public hintgen::SolutionChecker {
  public:
    explicit RecordingChecker(std::set<std::string> accepted) : accepted_(std::move(accepted)) {}

    bool check(const hintgen::Exercise &, std::string_view answer) const override {
        seen.emplace_back(answer);
        return accepted_.count(std::string(answer)) > 0;
    }

    mutable std::vector<std::string> seen;

  private:
    std::set<std::string> accepted_;
};

} // namespace fixtures
