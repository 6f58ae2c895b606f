#pragma once

// Command-line front end. tools/hintgen.cpp forwards main() to run().

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hintgen/adapters.hpp"
#include "hintgen/corpus.hpp"
#include "hintgen/eval.hpp"
#include "hintgen/feedback.hpp"
#include "hintgen/hintqa.hpp"
#include "hintgen/qg.hpp"
#include "hintgen/question_bank.hpp"
#include "hintgen/reranker.hpp"
#include "hintgen/service.hpp"

namespace hintgen::cli {

// ---- backend factories ------------------------------------------------------------------

/// Saved generator handle: {"kind": "memorize", ...} or {"kind": "adapter", "endpoint", "model_id"}.
inline std::shared_ptr<const GeneratorBackend> load_generator_file(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw StorageError("cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception &e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    auto kind = j.value("kind", std::string{});
    if (kind == "memorize")
        return MemorizingGenerator::load(path);
    if (kind == "adapter")
        return std::make_shared<HttpGeneratorBackend>(j.at("endpoint").get<std::string>(),
                                                      j.value("model_id", std::string{}));
    throw ParseError(path.string() + ": unknown generator kind '" + kind + "'");
}

/// template | memorize | echo:<canned.jsonl> | model:<file> | adapter:<url>
inline std::shared_ptr<const GeneratorBackend> make_generator(const std::string &spec) {
    if (spec == "template")
        return std::make_shared<TemplateGenerator>();
    if (spec == "memorize")
        return std::make_shared<MemorizingGenerator>();
    if (spec.rfind("echo:", 0) == 0)
        return EchoGenerator::load(spec.substr(5), std::make_shared<TemplateGenerator>());
    if (spec.rfind("model:", 0) == 0)
        return load_generator_file(spec.substr(6));
    if (spec.rfind("adapter:", 0) == 0)
        return std::make_shared<HttpGeneratorBackend>(spec.substr(8));
    throw ConfigError("unknown generator '" + spec + "'");
}

inline std::vector<std::string> lm_corpus_from(const std::filesystem::path &qg_dataset) {
    std::vector<std::string> out;
    for (const auto &x : read_jsonl<QGExample>(qg_dataset))
        out.push_back(x.target);
    return out;
}

/// stub | fixed | adapter:<url>
inline std::shared_ptr<const AuxiliaryScorers> make_scorers(const std::string &spec, const std::string &lm_corpus,
                                                            std::size_t dim) {
    if (spec == "stub")
        return std::make_shared<StubScorers>(lm_corpus_from(lm_corpus), dim);
    if (spec == "fixed")
        return std::make_shared<FixedScorers>(0.5, 10.0, dim);
    if (spec.rfind("adapter:", 0) == 0)
        return std::make_shared<HttpScorers>(spec.substr(8));
    throw ConfigError("unknown scorers '" + spec + "'");
}

/// overlap | adapter:<url>
inline std::shared_ptr<const NLIBackend> make_nli(const std::string &spec) {
    if (spec == "overlap")
        return std::make_shared<OverlapNLI>();
    if (spec.rfind("adapter:", 0) == 0)
        return std::make_shared<HttpNLIBackend>(spec.substr(8));
    throw ConfigError("unknown nli backend '" + spec + "'");
}

// ---- helpers ---------------------------------------------------------------------------

inline void write_text(const std::filesystem::path &path, const std::string &content) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw StorageError("cannot write " + path.string());
    out << content;
}

inline std::string fixed(double x, int digits = 2) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << x;
    return s.str();
}

/// Run context shared by all subcommands.
struct Context {
    std::istream &in;
    std::ostream &out;
    std::ostream &err;
    std::string subcommand;
    json config = json::object();
    std::vector<std::string> outputs;
    std::string manifest;

    void log_config() const { err << "[hintgen] " << subcommand << " config " << config.dump() << '\n'; }

    void output(const std::filesystem::path &p) { outputs.push_back(p.string()); }

    void finish() const {
        if (manifest.empty())
            return;
        json m{{"tool", "hintgen"}, {"subcommand", subcommand}, {"config", config}, {"outputs", outputs}};
        write_text(manifest, m.dump(2) + "\n");
    }
};

inline std::vector<std::pair<FeatureVector, double>> annotation_rows(const std::vector<UsefulnessGroup> &groups) {
    std::vector<std::pair<FeatureVector, double>> rows;
    for (const auto &g : groups)
        for (std::size_t i = 0; i < g.candidates.size(); ++i)
            rows.emplace_back(*g.candidates[i].features, *g.gold[i]);
    return rows;
}

// ---- subcommands ---------------------------------------------------------------------------

struct SplitArgs {
    std::string input = "data/qg_dataset.jsonl";
    std::string out_dir = "run/split";
    std::uint64_t seed = 13;
};

inline void cmd_split(Context &ctx, const SplitArgs &a) {
    ctx.config = {{"input", a.input}, {"out_dir", a.out_dir}, {"seed", a.seed}, {"ratio", "220:40:40"}};
    ctx.log_config();
    auto parts = split_qg_dataset(read_jsonl<QGExample>(a.input), a.seed);
    std::filesystem::path dir(a.out_dir);
    std::filesystem::create_directories(dir);
    write_jsonl(dir / "train.jsonl", parts.train);
    write_jsonl(dir / "valid.jsonl", parts.valid);
    write_jsonl(dir / "test.jsonl", parts.test);
    for (auto name : {"train.jsonl", "valid.jsonl", "test.jsonl"})
        ctx.output(dir / name);
    ctx.out << "split: train " << parts.train.size() << ", valid " << parts.valid.size() << ", test "
            << parts.test.size() << '\n';
}

struct TrainQGArgs {
    std::string train = "run/split/train.jsonl";
    std::string valid = "run/split/valid.jsonl";
    std::string base = "memorize";
    std::string out = "run/qg_model.json";
    TrainConfig config;
};

inline void cmd_train_qg(Context &ctx, const TrainQGArgs &a) {
    ctx.config = {{"train", a.train}, {"valid", a.valid}, {"base", a.base}, {"out", a.out}, {"train_config", a.config}};
    ctx.log_config();
    Partition<QGExample> data;
    data.train = read_jsonl<QGExample>(a.train);
    data.valid = read_jsonl<QGExample>(a.valid);
    auto base = make_generator(a.base);
    auto trained = fine_tune_qg(data, *base, a.config);
    if (auto mem = std::dynamic_pointer_cast<const MemorizingGenerator>(trained.model)) {
        std::filesystem::path p(a.out);
        if (p.has_parent_path())
            std::filesystem::create_directories(p.parent_path());
        mem->save(p);
    } else if (auto http = std::dynamic_pointer_cast<const HttpGeneratorBackend>(trained.model)) {
        write_text(a.out,
                   json{{"kind", "adapter"}, {"endpoint", a.base.substr(8)}, {"model_id", http->model_id()}}.dump() +
                       "\n");
    } else {
        throw CapabilityError("trained model cannot be saved");
    }
    ctx.output(a.out);
    for (std::size_t e = 0; e < trained.validation_loss.size(); ++e)
        ctx.out << "epoch " << e + 1 << " validation_loss " << fixed(trained.validation_loss[e], 6) << '\n';
}

struct ScorerArgs {
    std::string scorers = "stub";
    std::string lm_corpus = "data/qg_dataset.jsonl";
    std::size_t embedding_dim = kDefaultSentenceEmbeddingDim;

    json to_json() const { return {{"scorers", scorers}, {"lm_corpus", lm_corpus}, {"embedding_dim", embedding_dim}}; }
};

struct BuildBankArgs {
    std::string exercises = "data/exercises.jsonl";
    std::string generator = "echo:data/canned_questions.jsonl";
    std::string reranker; // empty: every candidate gets predicted usefulness 0
    std::string out = "run/question_bank.jsonl";
    int k = 3;
    ScorerArgs scoring;
};

inline void cmd_build_bank(Context &ctx, const BuildBankArgs &a) {
    ctx.config = {{"exercises", a.exercises}, {"generator", a.generator}, {"reranker", a.reranker},
                  {"out", a.out},             {"k", a.k},                 {"scoring", a.scoring.to_json()}};
    ctx.log_config();
    auto exercises = load_exercises(a.exercises);
    auto gen = make_generator(a.generator);
    auto scorers = make_scorers(a.scoring.scorers, a.scoring.lm_corpus, a.scoring.embedding_dim);
    auto model = a.reranker.empty()
                     ? RerankerModel::mean_baseline(0.0, to_dense(FeatureVector{std::vector<double>(
                                                                      a.scoring.embedding_dim, 0.0)})
                                                             .size())
                     : RerankerModel::load(a.reranker);
    auto result = build_question_bank(std::move(exercises), *gen, *scorers, model, a.k);
    for (const auto &s : result.skips)
        ctx.err << "[hintgen] build-bank skipped " << s.exercise_id << "/" << s.reference_id << ": " << s.reason
                << '\n';
    std::filesystem::path p(a.out);
    if (p.has_parent_path())
        std::filesystem::create_directories(p.parent_path());
    write_question_bank(p, result.exercises);
    ctx.output(p);
    std::size_t refs = 0;
    for (const auto &ex : result.exercises)
        refs += ex.references.size();
    ctx.out << "build-bank: " << refs - result.skips.size() << " references banked, " << result.skips.size()
            << " skipped\n";
}

struct TrainRerankerArgs {
    std::string annotations = "data/annotations_train.jsonl";
    std::string features = "ling-sbert";
    double ridge = 0.0;
    std::string out = "run/reranker.txt";
    ScorerArgs scoring;
};

inline void cmd_train_reranker(Context &ctx, const TrainRerankerArgs &a) {
    ctx.config = {{"annotations", a.annotations}, {"features", a.features}, {"ridge", a.ridge},
                  {"out", a.out},                 {"scoring", a.scoring.to_json()}};
    ctx.log_config();
    auto scorers = make_scorers(a.scoring.scorers, a.scoring.lm_corpus, a.scoring.embedding_dim);
    auto groups = group_annotations(read_jsonl<UsefulnessAnnotation>(a.annotations), *scorers);
    auto model = fit_ols(annotation_rows(groups), feature_set_from_string(a.features), a.ridge);
    std::filesystem::path p(a.out);
    if (p.has_parent_path())
        std::filesystem::create_directories(p.parent_path());
    model.save(p);
    ctx.output(p);
    ctx.out << "train-reranker: " << annotation_rows(groups).size() << " rows, " << model.feature_dimension
            << " features, training mean " << fixed(model.training_mean, 4) << '\n';
}

struct EvalRerankerArgs {
    std::string train = "data/annotations_train.jsonl";
    std::string test = "data/annotations_test.jsonl";
    std::string model = "all";
    bool mean_baseline = false;
    double ridge = 0.0;
    std::string out;
    ScorerArgs scoring;
};

inline void cmd_eval_reranker(Context &ctx, const EvalRerankerArgs &a) {
    ctx.config = {{"train", a.train}, {"test", a.test},   {"model", a.model},
                  {"mean_baseline", a.mean_baseline}, {"ridge", a.ridge}, {"out", a.out},
                  {"scoring", a.scoring.to_json()}};
    ctx.log_config();
    auto scorers = make_scorers(a.scoring.scorers, a.scoring.lm_corpus, a.scoring.embedding_dim);
    auto train = group_annotations(read_jsonl<UsefulnessAnnotation>(a.train), *scorers);
    auto test = group_annotations(read_jsonl<UsefulnessAnnotation>(a.test), *scorers);
    auto train_rows = annotation_rows(train);
    auto test_rows = annotation_rows(test);

    std::vector<std::string> models;
    if (a.model == "all")
        models = {"mean", "linguistic", "sbert", "ling-sbert"};
    else
        models = {a.model};
    if (a.mean_baseline && std::find(models.begin(), models.end(), "mean") == models.end())
        models.insert(models.begin(), "mean");

    json report = json::array();
    ctx.out << std::left << std::setw(12) << "model" << std::setw(10) << "MSE" << std::setw(10) << "MAE"
            << std::setw(10) << "PCR"
            << "usefulness\n";
    for (const auto &name : models) {
        RerankerModel m;
        if (name == "mean") {
            double mean = 0;
            for (const auto &r : train_rows)
                mean += r.second;
            mean /= static_cast<double>(train_rows.size());
            m = RerankerModel::mean_baseline(mean, to_dense(train_rows.front().first).size());
        } else {
            m = fit_ols(train_rows, feature_set_from_string(name), a.ridge);
        }
        std::vector<double> pred, gold;
        for (const auto &[f, y] : test_rows) {
            pred.push_back(predict_usefulness(m, f));
            gold.push_back(y);
        }
        auto metrics = regression_metrics(pred, gold);
        double useful = usefulness_metric(m, test);
        report.push_back({{"model", name}, {"metrics", metrics}, {"usefulness", useful}});
        ctx.out << std::left << std::setw(12) << name << std::setw(10) << fixed(metrics.mse) << std::setw(10)
                << fixed(metrics.mae) << std::setw(10) << (metrics.pearson ? fixed(*metrics.pearson) : "-")
                << fixed(useful) << '\n';
    }
    if (!a.out.empty()) {
        write_text(a.out, report.dump(2) + "\n");
        ctx.output(a.out);
    }
}

struct EvalGenArgs {
    std::string test = "run/split/test.jsonl";
    std::string generator = "model:run/qg_model.json";
    std::string out;
};

inline void cmd_eval_gen(Context &ctx, const EvalGenArgs &a) {
    ctx.config = {{"test", a.test}, {"generator", a.generator}, {"out", a.out}};
    ctx.log_config();
    auto test = read_jsonl<QGExample>(a.test);
    auto gen = make_generator(a.generator);
    std::vector<std::string> cands, refs;
    for (const auto &x : test) {
        auto outs = gen->generate(x.source, 1, TrainConfig{}.max_output_tokens);
        cands.push_back(outs.empty() ? std::string{} : outs.front().text);
        refs.push_back(x.target);
    }
    auto r = evaluate_generation(cands, refs);
    ctx.out << "eval-gen: n " << r.n_examples << "  BLEU1 " << fixed(r.bleu1) << "  BLEU2 " << fixed(r.bleu2)
            << "  BLEU3 " << fixed(r.bleu3) << "  BLEU4 " << fixed(r.bleu4) << "  ROUGE-L " << fixed(r.rouge_l)
            << '\n';
    if (!a.out.empty()) {
        write_text(a.out, json(r).dump(2) + "\n");
        ctx.output(a.out);
    }
}

struct EvalGainsArgs {
    std::string interactions = "data/interactions.jsonl";
    std::string out;
};

inline void cmd_eval_gains(Context &ctx, const EvalGainsArgs &a) {
    ctx.config = {{"interactions", a.interactions}, {"out", a.out}};
    ctx.log_config();
    auto records = read_jsonl<InteractionRecord>(a.interactions);
    json report = json::array();
    ctx.out << std::left << std::setw(16) << "model" << std::setw(22) << "first attempt" << "all attempts\n";
    for (auto m : {FeedbackModel::minimal, FeedbackModel::human, FeedbackModel::non_question,
                   FeedbackModel::question_based}) {
        try {
            auto r = learning_gain_report(records, m);
            report.push_back(r);
            ctx.out << std::left << std::setw(16) << to_string(m) << std::setw(22)
                    << (fixed(r.gain_first_attempt, 1) + " +/- " + fixed(r.ci95_half_width_first_attempt, 1))
                    << fixed(r.gain_all_attempts, 1) << " +/- " << fixed(r.ci95_half_width, 1) << "  (n=" << r.n
                    << ")\n";
        } catch (const ValidationError &) {
            ctx.out << std::left << std::setw(16) << to_string(m) << "no feedback events\n";
        }
    }
    if (!a.out.empty()) {
        write_text(a.out, report.dump(2) + "\n");
        ctx.output(a.out);
    }
}

struct HintQAArgs {
    std::string qa = "data/qa_pairs.jsonl";
    std::string out_dir = "run/hintqa";
    std::string base = "memorize";
    std::string nli = "overlap";
    std::uint64_t seed = 13;
    int k = 3;
    double tau = 0.8;
};

inline void cmd_hintqa(Context &ctx, const HintQAArgs &a) {
    ctx.config = {{"qa", a.qa},     {"out_dir", a.out_dir}, {"base", a.base}, {"nli", a.nli},
                  {"seed", a.seed}, {"k", a.k},             {"tau", a.tau}};
    ctx.log_config();
    auto pairs = read_jsonl<QAPair>(a.qa);
    auto data = split_qa_pairs(pairs, a.seed);
    FeedbackEngine engine(std::make_shared<HashEmbeddingBackend>(), FeedbackEngineConfig{a.tau}, FeedbackTemplates{},
                          QuestionSource{std::make_shared<TemplateGenerator>(), nullptr, std::nullopt, 3});
    auto base = make_generator(a.base);
    HintQATraining training;
    try {
        training = train_hint_qa(data, *base, engine, TrainConfig{});
    } catch (const StageError &) {
        throw;
    } catch (const std::exception &e) {
        throw StageError("train", e.what());
    }
    for (const auto &s : training.skips)
        ctx.err << "[hintgen] hintqa skipped " << s.id << " (" << s.stage << "): " << s.reason << '\n';
    auto leaked = leaked_test_ids(data.test, training);
    if (!leaked.empty())
        throw StageError("audit", "test ids reached training data: " + text::join(leaked, ", "));
    auto nli = make_nli(a.nli);
    auto report = evaluate_hint_qa(data.test, training.models, *nli, a.k);

    std::filesystem::path dir(a.out_dir);
    std::filesystem::create_directories(dir);
    write_jsonl(dir / "hint_triples.jsonl", training.hint_triples);
    write_jsonl(dir / "hqa_dataset.jsonl", training.hqa_records);
    write_text(dir / "hintqa_report.json", json(report).dump(2) + "\n");
    for (auto name : {"hint_triples.jsonl", "hqa_dataset.jsonl", "hintqa_report.json"})
        ctx.output(dir / name);

    auto row = [&](const char *name, const GenEvalReport &r) {
        ctx.out << std::left << std::setw(18) << name << "BLEU1 " << fixed(r.bleu1) << "  BLEU4 " << fixed(r.bleu4)
                << "  ROUGE-L " << fixed(r.rouge_l) << '\n';
    };
    ctx.out << "hintqa: train " << data.train.size() << ", valid " << data.valid.size() << ", test "
            << data.test.size() << "; id audit clean\n";
    row("qa", report.qa_only);
    row("hint-assisted", report.hint_assisted);
    row("hint+entailment", report.hint_entailment);
}

struct ServiceArgs {
    std::string config_file;
    std::string exercises, question_bank, templates, interactions, sessions_dir, backend, feedback_model;
    double tau = -1, tau_checker = -1;
    int max_attempts = -1, port = -1;
    bool live_generation = false;

    ServiceConfig resolve() const {
        auto c = load_service_config(config_file.empty() ? std::nullopt
                                                         : std::optional<std::filesystem::path>(config_file));
        auto set = [](std::string &dst, const std::string &v) {
            if (!v.empty())
                dst = v;
        };
        set(c.exercises, exercises);
        set(c.question_bank, question_bank);
        set(c.templates, templates);
        set(c.interactions, interactions);
        set(c.sessions_dir, sessions_dir);
        set(c.backend, backend);
        set(c.feedback_model, feedback_model);
        if (tau >= 0)
            c.tau = tau;
        if (tau_checker >= 0)
            c.tau_checker = tau_checker;
        if (max_attempts >= 0)
            c.max_attempts = max_attempts;
        if (port >= 0)
            c.port = port;
        if (live_generation)
            c.live_generation = true;
        return c;
    }
};

inline void cmd_serve(Context &ctx, const ServiceArgs &a) {
    auto c = a.resolve();
    ctx.config = c;
    ctx.log_config();
    auto svc = build_service(c);
    httplib::Server srv;
    register_routes(srv, *svc);
    ctx.err << "[hintgen] serving on http://" << c.host << ":" << c.port << '\n';
    if (!srv.listen(c.host, c.port))
        throw StorageError("cannot listen on " + c.host + ":" + std::to_string(c.port));
}

struct ChatArgs {
    ServiceArgs service;
    std::string exercise;
};

/// Terminal session: one student line per turn from `in`, tutor turns to `out`.
inline void cmd_chat(Context &ctx, const ChatArgs &a) {
    auto c = a.service.resolve();
    ctx.config = c;
    ctx.config["exercise"] = a.exercise;
    ctx.log_config();
    auto svc = build_service(c, [] { return std::int64_t{0}; });
    std::string id = a.exercise.empty() ? svc->list_exercises().front()->id : a.exercise;
    auto s = svc->create_session(id);
    ctx.out << "tutor: " << s.problem << '\n';
    std::string line;
    Phase phase = Phase::awaiting_answer;
    while (phase != Phase::done && std::getline(ctx.in, line)) {
        if (text::trim(line).empty())
            continue;
        ctx.out << "student: " << line << '\n';
        MessageInput msg;
        if (phase == Phase::awaiting_mcq)
            msg.mcq_choice = line;
        else
            msg.text = line;
        auto r = svc->post_message(s.session_id, msg);
        ctx.out << "tutor: " << r.reply << '\n';
        if (r.mcq_options)
            ctx.out << "options: [" << r.mcq_options->first << "] [" << r.mcq_options->second << "]\n";
        phase = r.phase;
    }
    ctx.out << "session " << s.session_id << " " << to_string(phase) << '\n';
}

// ---- entry point ---------------------------------------------------------------------------

inline void add_scorer_flags(CLI::App *cmd, ScorerArgs &s) {
    cmd->add_option("--scorers", s.scorers, "stub | fixed | adapter:<url>")->capture_default_str();
    cmd->add_option("--lm-corpus", s.lm_corpus, "QG dataset whose questions train the stub LM")->capture_default_str();
    cmd->add_option("--embedding-dim", s.embedding_dim, "sentence embedding dimension")->capture_default_str();
}

inline void add_service_flags(CLI::App *cmd, ServiceArgs &s) {
    cmd->add_option("--config", s.config_file, "service config JSON; HINTGEN_* environment variables override it");
    cmd->add_option("--exercises", s.exercises, "exercise corpus JSONL");
    cmd->add_option("--question-bank", s.question_bank, "question bank JSONL");
    cmd->add_option("--templates", s.templates, "feedback template file");
    cmd->add_option("--interactions", s.interactions, "interaction log JSONL");
    cmd->add_option("--sessions-dir", s.sessions_dir, "directory for persisted sessions");
    cmd->add_option("--backend", s.backend, "stub | adapter:<url>");
    cmd->add_option("--feedback-model", s.feedback_model, "question_based | minimal");
    cmd->add_option("--tau", s.tau, "cause/effect match threshold");
    cmd->add_option("--tau-checker", s.tau_checker, "solution checker threshold");
    cmd->add_option("--max-attempts", s.max_attempts, "attempts before moving on");
    cmd->add_flag("--live-generation", s.live_generation, "generate questions for references without a bank");
}

inline int run(const std::vector<std::string> &args, std::istream &in, std::ostream &out, std::ostream &err) {
    CLI::App app{"hintgen: question-based feedback pipeline", "hintgen"};
    app.require_subcommand(1);
    std::string manifest;
    app.add_option("--manifest", manifest, "write a JSON run manifest to this path");

    SplitArgs split;
    auto *c_split = app.add_subcommand("split", "split the QG dataset 220:40:40");
    c_split->add_option("--input", split.input)->capture_default_str();
    c_split->add_option("--out-dir", split.out_dir)->capture_default_str();
    c_split->add_option("--seed", split.seed)->capture_default_str();

    TrainQGArgs tqg;
    auto *c_tqg = app.add_subcommand("train-qg", "fine-tune a question generator");
    c_tqg->add_option("--train", tqg.train)->capture_default_str();
    c_tqg->add_option("--valid", tqg.valid)->capture_default_str();
    c_tqg->add_option("--base", tqg.base, "memorize | adapter:<url>")->capture_default_str();
    c_tqg->add_option("--out", tqg.out)->capture_default_str();
    c_tqg->add_option("--epochs", tqg.config.epochs)->capture_default_str();
    c_tqg->add_option("--learning-rate", tqg.config.learning_rate)->capture_default_str();
    c_tqg->add_option("--batch-size", tqg.config.batch_size)->capture_default_str();

    BuildBankArgs bb;
    auto *c_bb = app.add_subcommand("build-bank", "generate and score questions for every reference");
    c_bb->add_option("--exercises", bb.exercises)->capture_default_str();
    c_bb->add_option("--generator", bb.generator, "template | echo:<file> | model:<file> | adapter:<url>")
        ->capture_default_str();
    c_bb->add_option("--reranker", bb.reranker, "reranker model file");
    c_bb->add_option("--out", bb.out)->capture_default_str();
    c_bb->add_option("-k,--k", bb.k, "candidates per reference")->capture_default_str();
    add_scorer_flags(c_bb, bb.scoring);

    TrainRerankerArgs tr;
    auto *c_tr = app.add_subcommand("train-reranker", "fit the usefulness regressor");
    c_tr->add_option("--annotations", tr.annotations)->capture_default_str();
    c_tr->add_option("--features", tr.features, "linguistic | sbert | ling-sbert")->capture_default_str();
    c_tr->add_option("--ridge", tr.ridge)->capture_default_str();
    c_tr->add_option("--out", tr.out)->capture_default_str();
    add_scorer_flags(c_tr, tr.scoring);

    EvalRerankerArgs er;
    auto *c_er = app.add_subcommand("eval-reranker", "MSE, MAE, Pearson and usefulness per feature set");
    c_er->add_option("--train", er.train)->capture_default_str();
    c_er->add_option("--test", er.test)->capture_default_str();
    c_er->add_option("--model", er.model)
        ->check(CLI::IsMember({"mean", "linguistic", "sbert", "ling-sbert", "all"}))
        ->capture_default_str();
    c_er->add_flag("--mean-baseline", er.mean_baseline, "include the training-mean baseline");
    c_er->add_option("--ridge", er.ridge)->capture_default_str();
    c_er->add_option("--out", er.out, "JSON report path");
    add_scorer_flags(c_er, er.scoring);

    EvalGenArgs eg;
    auto *c_eg = app.add_subcommand("eval-gen", "BLEU-1..4 and ROUGE-L of a generator on a test split");
    c_eg->add_option("--test", eg.test)->capture_default_str();
    c_eg->add_option("--generator", eg.generator)->capture_default_str();
    c_eg->add_option("--out", eg.out, "JSON report path");

    EvalGainsArgs eg2;
    auto *c_gains = app.add_subcommand("eval-gains", "learning gains per feedback model");
    c_gains->add_option("--interactions", eg2.interactions)->capture_default_str();
    c_gains->add_option("--out", eg2.out, "JSON report path");

    HintQAArgs hq;
    auto *c_hq = app.add_subcommand("hintqa", "train and evaluate hint-assisted QA");
    c_hq->add_option("--qa", hq.qa)->capture_default_str();
    c_hq->add_option("--out-dir", hq.out_dir)->capture_default_str();
    c_hq->add_option("--base", hq.base, "memorize | adapter:<url>")->capture_default_str();
    c_hq->add_option("--nli", hq.nli, "overlap | adapter:<url>")->capture_default_str();
    c_hq->add_option("--seed", hq.seed)->capture_default_str();
    c_hq->add_option("-k,--k", hq.k)->capture_default_str();
    c_hq->add_option("--tau", hq.tau)->capture_default_str();

    ServiceArgs sv;
    auto *c_sv = app.add_subcommand("serve", "run the tutoring HTTP service");
    add_service_flags(c_sv, sv);
    c_sv->add_option("--port", sv.port, "listen port");

    ChatArgs ch;
    auto *c_ch = app.add_subcommand("chat", "terminal tutoring session reading student turns from stdin");
    add_service_flags(c_ch, ch.service);
    c_ch->add_option("--exercise", ch.exercise, "exercise id (default: first)");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    auto *sub = app.get_subcommands().front();
    Context ctx{in, out, err, sub->get_name(), json::object(), {}, manifest};
    try {
        if (sub == c_split) cmd_split(ctx, split);
        else if (sub == c_tqg) cmd_train_qg(ctx, tqg);
        else if (sub == c_bb) cmd_build_bank(ctx, bb);
        else if (sub == c_tr) cmd_train_reranker(ctx, tr);
        else if (sub == c_er) cmd_eval_reranker(ctx, er);
        else if (sub == c_eg) cmd_eval_gen(ctx, eg);
        else if (sub == c_gains) cmd_eval_gains(ctx, eg2);
        else if (sub == c_hq) cmd_hintqa(ctx, hq);
        else if (sub == c_sv) cmd_serve(ctx, sv);
        else if (sub == c_ch) cmd_chat(ctx, ch);
        ctx.finish();
    } catch (const StageError &e) {
        err << "error [" << ctx.subcommand << "/" << e.stage() << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception &e) {
        err << "error [" << ctx.subcommand << "]: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

inline int run(int argc, const char *const *argv, std::istream &in = std::cin, std::ostream &out = std::cout,
               std::ostream &err = std::cerr) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);
    return run(args, in, out, err);
}

} // namespace hintgen::cli
