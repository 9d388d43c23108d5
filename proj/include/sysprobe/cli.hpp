#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sysprobe/compgen.hpp"
#include "sysprobe/corpus.hpp"
#include "sysprobe/embedding.hpp"
#include "sysprobe/errors.hpp"
#include "sysprobe/experiments.hpp"
#include "sysprobe/heuristics.hpp"
#include "sysprobe/lexicon.hpp"
#include "sysprobe/model.hpp"
#include "sysprobe/natural.hpp"
#include "sysprobe/trainer.hpp"

namespace sysprobe::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// ---------------------------------------------------------------------------
// Plumbing
// ---------------------------------------------------------------------------

namespace detail {

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError("invalid JSON in " + path);
    return j;
}

// Stable content hash of the effective config (nlohmann objects dump with
// sorted keys).
inline std::string config_hash(const json& config) {
    std::uint64_t h = fnv1a64(config.dump());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Write-to-temp-then-rename so failures never leave partial outputs.
inline void write_text_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline void write_json_atomic(const fs::path& path, const json& j) {
    write_text_atomic(path, j.dump(2) + "\n");
}

// Pending output set: everything is rendered first, then written.
struct OutputSet {
    std::vector<std::pair<fs::path, std::string>> files;

    void add_text(const fs::path& path, std::string content) {
        files.emplace_back(path, std::move(content));
    }
    void add_json(const fs::path& path, const json& j) { add_text(path, j.dump(2) + "\n"); }
    void write_all() const {
        for (const auto& [path, content] : files) write_text_atomic(path, content);
    }
};

// Shortest representation that parses back to the same double, so TSV and
// JSON reports carry identical numbers.
inline std::string format_double(double value) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, end);
}

inline std::string tsv_header(const std::string& hash, std::uint64_t seed) {
    return "# config_hash=" + hash + " seed=" + std::to_string(seed) + "\n";
}

inline std::uint64_t seed_or(const json& block, const char* key, std::uint64_t master,
                             const char* tag) {
    if (block.contains(key)) return block.at(key).get<std::uint64_t>();
    return derive_seed(master, tag);
}

inline std::array<double, 3> split_of(const json& block) {
    std::array<double, 3> split = {0.8, 0.1, 0.1};
    if (block.contains("split")) {
        auto v = block.at("split").get<std::vector<double>>();
        if (v.size() != 3) throw ConfigError("split must have 3 fractions");
        split = {v[0], v[1], v[2]};
    }
    return split;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateOptions {
    std::string spec_path;
    std::string lexicon_path;
    std::string out_dir;
    std::int64_t seed_override = -1;
    bool verbose = false;
};

inline compgen::GenerationSpec parse_generation_spec(const json& j) {
    compgen::GenerationSpec spec;
    if (!j.contains("pairs_per_subtype")) throw ConfigError("spec needs pairs_per_subtype");
    spec.pairs_per_subtype = j.at("pairs_per_subtype").get<std::size_t>();
    spec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("sub_types")) {
        spec.sub_types.clear();
        for (const auto& name : j.at("sub_types"))
            spec.sub_types.push_back(pair_type_from_name(name.get<std::string>()));
    }
    if (j.contains("np_mode")) {
        const std::string mode = j.at("np_mode").get<std::string>();
        if (mode == "simple") spec.np_mode = compgen::NpMode::Simple;
        else if (mode == "long") spec.np_mode = compgen::NpMode::Long;
        else if (mode == "non_noun") spec.np_mode = compgen::NpMode::NonNoun;
        else throw ConfigError("unknown np_mode \"" + mode + "\"");
    }
    spec.split = detail::split_of(j);
    spec.validate();
    return spec;
}

inline json corpus_counts(const Corpus& corpus) {
    json counts;
    counts["pairs"] = corpus.size();
    std::map<std::string, std::size_t> by_label, by_type;
    for (const auto& pair : corpus.pairs) {
        by_label[pair.label ? label_name(*pair.label) : "unlabeled"]++;
        by_type[pair_type_name(pair.pair_type)]++;
    }
    counts["by_label"] = by_label;
    counts["by_pair_type"] = by_type;
    return counts;
}

inline int cmd_generate(const GenerateOptions& options) {
    json spec_json = detail::load_json_file(options.spec_path);
    if (options.seed_override >= 0)
        spec_json["seed"] = static_cast<std::uint64_t>(options.seed_override);
    compgen::GenerationSpec spec = parse_generation_spec(spec_json);
    Lexicon lexicon = load_lexicon(options.lexicon_path);

    Corpus corpus = compgen::generate_comparisons(spec, lexicon);
    compgen::CorpusSplits splits =
        compgen::split_comparisons(corpus, spec.split, derive_seed(spec.seed, "split"));

    const std::string hash = detail::config_hash(spec_json);
    json manifest;
    manifest["config_hash"] = hash;
    manifest["seed"] = spec.seed;
    manifest["spec"] = spec_json;
    manifest["counts"] = {{"full", corpus_counts(corpus)},
                          {"train", corpus_counts(splits.train)},
                          {"val", corpus_counts(splits.val)},
                          {"test", corpus_counts(splits.test)}};

    detail::OutputSet outputs;
    const fs::path out(options.out_dir);
    outputs.add_text(out / "train.jsonl", corpus_to_string(splits.train));
    outputs.add_text(out / "val.jsonl", corpus_to_string(splits.val));
    outputs.add_text(out / "test.jsonl", corpus_to_string(splits.test));
    outputs.add_json(out / "manifest.json", manifest);
    outputs.write_all();
    if (options.verbose)
        std::cerr << "generated " << corpus.size() << " pairs into " << options.out_dir << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

struct AuditOptions {
    std::string corpus_path;
    std::string thesaurus_path;
    std::string reference_path;  // optional second corpus for vocab divergence
    std::string out_dir;
    bool verbose = false;
};

namespace detail {

inline json report_to_json(const heuristics::HeuristicReport& report) {
    json j;
    j["feature"] = report.feature_name;
    j["corpus_size"] = report.corpus_size;
    for (int lab = 0; lab < kNumLabels; ++lab) {
        const char* name = label_name(static_cast<Label>(lab));
        json row;
        row["with_feature"] = report.with_feature[lab];
        row["label_total"] = report.label_total(lab);
        row["p_feature_given_label"] = report.p_feature_given_label[lab]
                                           ? json(*report.p_feature_given_label[lab])
                                           : json(nullptr);
        row["p_label_given_feature"] = report.p_label_given_feature[lab]
                                           ? json(*report.p_label_given_feature[lab])
                                           : json(nullptr);
        j["labels"][name] = std::move(row);
    }
    return j;
}

inline void report_to_tsv(std::ostringstream& tsv, const std::string& subset,
                          const heuristics::HeuristicReport& report) {
    for (int lab = 0; lab < kNumLabels; ++lab) {
        tsv << report.feature_name << '\t' << subset << '\t'
            << label_name(static_cast<Label>(lab)) << '\t';
        if (report.p_feature_given_label[lab]) tsv << format_double(*report.p_feature_given_label[lab]);
        else tsv << "undefined";
        tsv << '\t';
        if (report.p_label_given_feature[lab]) tsv << format_double(*report.p_label_given_feature[lab]);
        else tsv << "undefined";
        tsv << '\t' << report.with_feature[lab] << '\t' << report.label_total(lab) << '\n';
    }
}

}  // namespace detail

inline int cmd_audit(const AuditOptions& options) {
    Corpus corpus = load_corpus(options.corpus_path);
    if (corpus.empty()) throw EmptyCorpus("audit: corpus is empty");
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (!corpus.pairs[i].label)
            throw MissingLabel("pair on line " + std::to_string(i + 1) + " has no label");
    heuristics::Thesaurus thesaurus = heuristics::load_thesaurus(options.thesaurus_path);

    json effective = {{"corpus", options.corpus_path},
                      {"thesaurus", options.thesaurus_path},
                      {"reference", options.reference_path}};
    const std::string hash = detail::config_hash(effective);
    const std::uint64_t seed = 0;  // audits are deterministic, no sampling

    // Overlap ranking (the All row is always appended).
    std::vector<std::size_t> top_ks;
    for (std::size_t k : {std::size_t{1000}, std::size_t{10000}})
        if (k <= corpus.size()) top_ks.push_back(k);
    heuristics::OverlapRanking ranking = heuristics::rank_by_overlap(corpus, top_ks);

    json overlap_json = {{"config_hash", hash}, {"seed", seed}};
    std::ostringstream overlap_tsv;
    overlap_tsv << detail::tsv_header(hash, seed)
                << "top\tentailment\tneutral\tcontradiction\n";
    for (const auto& row : ranking.rows) {
        json jrow = {{"top", row.is_all ? json("all") : json(row.k)},
                     {"entailment", row.percent[0]},
                     {"neutral", row.percent[1]},
                     {"contradiction", row.percent[2]}};
        overlap_json["rows"].push_back(jrow);
        overlap_tsv << (row.is_all ? std::string("all") : std::to_string(row.k)) << '\t'
                    << detail::format_double(row.percent[0]) << '\t'
                    << detail::format_double(row.percent[1]) << '\t'
                    << detail::format_double(row.percent[2]) << '\n';
    }

    // Antonym and negation conditionals on the full corpus and on the
    // high-overlap subset.
    const std::size_t high_k = std::min<std::size_t>(10000, corpus.size());
    Corpus high_overlap = heuristics::high_overlap_subset(corpus, high_k);
    const std::string high_name = "high_overlap_top" + std::to_string(high_k);

    auto antonym_feature = [&thesaurus](const SentencePair& pair) {
        return heuristics::antonym_present(pair, thesaurus);
    };
    auto negation_feature = [](const SentencePair& pair) {
        return heuristics::negation_present(pair);
    };

    auto feature_reports = [&](const heuristics::PairPredicate& feature, const std::string& name) {
        json j = {{"config_hash", hash}, {"seed", seed}};
        std::ostringstream tsv;
        tsv << detail::tsv_header(hash, seed)
            << "feature\tsubset\tlabel\tp_feature_given_label\tp_label_given_feature\twith_"
               "feature\tlabel_total\n";
        heuristics::HeuristicReport full = heuristics::heuristic_report(corpus, feature, name);
        heuristics::HeuristicReport high =
            heuristics::heuristic_report(high_overlap, feature, name);
        j["subsets"]["full"] = detail::report_to_json(full);
        j["subsets"][high_name] = detail::report_to_json(high);
        detail::report_to_tsv(tsv, "full", full);
        detail::report_to_tsv(tsv, high_name, high);
        return std::make_pair(j, tsv.str());
    };
    auto [antonym_json, antonym_tsv] = feature_reports(antonym_feature, "antonym");
    auto [negation_json, negation_tsv] = feature_reports(negation_feature, "negation");

    detail::OutputSet outputs;
    const fs::path out(options.out_dir);
    outputs.add_json(out / "overlap_ranking.json", overlap_json);
    outputs.add_text(out / "overlap_ranking.tsv", overlap_tsv.str());
    outputs.add_json(out / "antonym_report.json", antonym_json);
    outputs.add_text(out / "antonym_report.tsv", antonym_tsv);
    outputs.add_json(out / "negation_report.json", negation_json);
    outputs.add_text(out / "negation_report.tsv", negation_tsv);

    if (!options.reference_path.empty()) {
        Corpus reference = load_corpus(options.reference_path);
        auto rows = heuristics::vocab_divergence(corpus, reference);
        json div_json = {{"config_hash", hash}, {"seed", seed}};
        std::ostringstream div_tsv;
        div_tsv << detail::tsv_header(hash, seed) << "word\trate_corpus\trate_reference\tabs_diff\n";
        for (const auto& row : rows) {
            div_json["rows"].push_back({{"word", row.word},
                                        {"rate_corpus", row.rate_a},
                                        {"rate_reference", row.rate_b},
                                        {"abs_diff", row.abs_diff}});
            div_tsv << row.word << '\t' << detail::format_double(row.rate_a) << '\t'
                    << detail::format_double(row.rate_b) << '\t'
                    << detail::format_double(row.abs_diff) << '\n';
        }
        outputs.add_json(out / "vocab_divergence.json", div_json);
        outputs.add_text(out / "vocab_divergence.tsv", div_tsv.str());
    }

    outputs.write_all();
    if (options.verbose) std::cerr << "audit reports written to " << options.out_dir << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// Shared experiment context
// ---------------------------------------------------------------------------

namespace detail {

struct ExpContext {
    json config;
    std::string hash;
    fs::path out;
    std::uint64_t master_seed = 0;
    bool verbose = false;

    Lexicon lexicon;        // full, as loaded
    Lexicon train_lexicon;  // nouns reduced by the held-out fraction
    model::ModelConfig model_config;
    EmbeddingTable table;

    void log(const std::string& message) const {
        if (verbose) std::cerr << "[sysprobe] " << message << "\n";
    }
};

inline EmbeddingTable build_table(const json& config, const Lexicon& lexicon) {
    if (!config.contains("embeddings")) throw ConfigError("config needs an embeddings block");
    const json& block = config.at("embeddings");
    if (block.contains("path")) {
        if (!block.contains("dim")) throw ConfigError("embeddings.path needs embeddings.dim");
        return load_embeddings(block.at("path").get<std::string>(), block.at("dim").get<int>());
    }
    if (block.contains("synthetic")) {
        const json& syn = block.at("synthetic");
        return synthetic_embeddings(compgen::lexicon_vocabulary(lexicon),
                                    syn.value("dim", 50), syn.value("seed", std::uint64_t{0}));
    }
    throw ConfigError("embeddings block needs \"path\" or \"synthetic\"");
}

inline ExpContext make_context(json config, const std::string& out_dir,
                               std::int64_t seed_override, bool verbose) {
    ExpContext ctx;
    if (seed_override >= 0) config["seed"] = static_cast<std::uint64_t>(seed_override);
    ctx.config = std::move(config);
    ctx.hash = config_hash(ctx.config);
    ctx.out = out_dir.empty() ? fs::path(ctx.config.value("out", "runs/out")) : fs::path(out_dir);
    ctx.master_seed = ctx.config.value("seed", std::uint64_t{0});
    ctx.verbose = verbose;

    if (!ctx.config.contains("lexicon")) throw ConfigError("config needs a lexicon path");
    ctx.lexicon = load_lexicon(ctx.config.at("lexicon").get<std::string>());

    // Reserve a deterministic slice of the noun list for zero-shot tests.
    const double heldout_fraction = ctx.config.value("heldout_noun_fraction", 0.25);
    if (heldout_fraction < 0.0 || heldout_fraction >= 1.0)
        throw ConfigError("heldout_noun_fraction must be in [0,1)");
    std::vector<std::string> nouns = ctx.lexicon.nouns;
    Rng rng(derive_seed(ctx.master_seed, "noun_partition"));
    rng.shuffle(nouns);
    const std::size_t heldout =
        static_cast<std::size_t>(std::llround(heldout_fraction * nouns.size()));
    ctx.train_lexicon = ctx.lexicon;
    ctx.train_lexicon.nouns.assign(nouns.begin() + heldout, nouns.end());
    std::sort(ctx.train_lexicon.nouns.begin(), ctx.train_lexicon.nouns.end());

    if (ctx.config.contains("model")) ctx.model_config = ctx.config.at("model").get<model::ModelConfig>();
    ctx.table = build_table(ctx.config, ctx.lexicon);
    if (ctx.table.dim != ctx.model_config.input_dim)
        throw ConfigError("embedding dim " + std::to_string(ctx.table.dim) +
                          " != model input_dim " + std::to_string(ctx.model_config.input_dim));
    return ctx;
}

inline compgen::CorpusSplits make_comparisons(const ExpContext& ctx) {
    if (!ctx.config.contains("comparisons")) throw ConfigError("config needs a comparisons block");
    const json& block = ctx.config.at("comparisons");
    compgen::GenerationSpec spec;
    spec.pairs_per_subtype = block.at("pairs_per_subtype").get<std::size_t>();
    spec.seed = seed_or(block, "seed", ctx.master_seed, "comparisons");
    spec.split = split_of(block);
    spec.validate();
    Corpus corpus = compgen::generate_comparisons(spec, ctx.train_lexicon);
    return compgen::split_comparisons(corpus, spec.split, derive_seed(spec.seed, "split"));
}

inline compgen::CorpusSplits make_natural(const ExpContext& ctx) {
    if (!ctx.config.contains("natural")) throw ConfigError("config needs a natural block");
    const json& block = ctx.config.at("natural");
    compgen::NaturalSpec spec;
    spec.size = block.at("size").get<std::size_t>();
    spec.seed = seed_or(block, "seed", ctx.master_seed, "natural");
    spec.p_negation_given_contradiction =
        block.value("p_negation_given_contradiction", spec.p_negation_given_contradiction);
    spec.p_antonym_given_contradiction =
        block.value("p_antonym_given_contradiction", spec.p_antonym_given_contradiction);
    spec.p_negation_given_entailment =
        block.value("p_negation_given_entailment", spec.p_negation_given_entailment);
    spec.validate();
    Corpus corpus = compgen::generate_natural(spec, ctx.train_lexicon);
    return compgen::split_stratified(corpus, split_of(block), derive_seed(spec.seed, "split"));
}

inline model::TrainConfig train_config_of(const ExpContext& ctx, const char* key,
                                          const char* seed_tag) {
    model::TrainConfig config;
    if (ctx.config.contains(key)) config = ctx.config.at(key).get<model::TrainConfig>();
    if (!ctx.config.contains(key) || !ctx.config.at(key).contains("seed"))
        config.seed = derive_seed(ctx.master_seed, seed_tag);
    return config;
}

// Vocabulary a trained model was exposed to (train + validation splits).
inline std::unordered_set<std::string> exposure_vocabulary(
    std::initializer_list<const Corpus*> corpora) {
    std::unordered_set<std::string> vocab;
    for (const Corpus* corpus : corpora)
        for (const auto& pair : corpus->pairs)
            for (const Sentence* sentence : {&pair.premise, &pair.hypothesis})
                for (const auto& token : sentence->tokens) vocab.insert(token);
    return vocab;
}

inline json stamped(const ExpContext& ctx, json payload) {
    payload["config_hash"] = ctx.hash;
    payload["seed"] = ctx.master_seed;
    payload["config"] = ctx.config;
    return payload;
}

inline std::string results_tsv(const ExpContext& ctx,
                               const std::vector<const experiments::ExperimentResult*>& results) {
    std::ostringstream tsv;
    tsv << tsv_header(ctx.hash, ctx.master_seed) << "experiment\ttest_set\taccuracy\tcorrect\ttotal\n";
    for (const auto* result : results)
        for (const auto& [name, outcome] : result->evals)
            tsv << result->experiment_name << '\t' << name << '\t'
                << format_double(outcome.accuracy_percent) << '\t' << outcome.confusion.trace()
                << '\t' << outcome.confusion.total() << '\n';
    return tsv.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// train / eval
// ---------------------------------------------------------------------------

struct ConfigOptions {
    std::string config_path;
    std::string out_dir;  // overrides config "out"
    std::int64_t seed_override = -1;
    bool verbose = false;
};

inline int cmd_train(const ConfigOptions& options) {
    json config = detail::load_json_file(options.config_path);
    detail::ExpContext ctx =
        detail::make_context(config, options.out_dir, options.seed_override, options.verbose);

    if (!ctx.config.contains("data")) throw ConfigError("train config needs a data block");
    const json& data = ctx.config.at("data");
    Corpus train_corpus = load_corpus(data.at("train").get<std::string>());
    Corpus val_corpus = load_corpus(data.at("val").get<std::string>());

    model::TrainConfig tconfig = detail::train_config_of(ctx, "train", "train");
    model::TrainMode mode = model::TrainMode::Fresh;
    model::ModelParams params0 = model::zero_params(ctx.model_config);
    if (ctx.config.value("mode", "fresh") == "fine_tune") {
        mode = model::TrainMode::FineTune;
        params0 = model::load_checkpoint(ctx.config.at("base_checkpoint").get<std::string>());
    }

    ctx.log("training on " + std::to_string(train_corpus.size()) + " pairs");
    model::TrainResult trained = model::train(train_corpus, val_corpus, params0, tconfig,
                                              ctx.table, mode);

    json log_json = detail::stamped(ctx, json{{"log", trained.log},
                                              {"oov_encodings", trained.oov_encodings}});
    detail::OutputSet outputs;
    outputs.add_json(ctx.out / "train_log.json", log_json);
    outputs.add_text(ctx.out / "checkpoint.json",
                     model::checkpoint_to_json(trained.params).dump(2) + "\n");
    outputs.write_all();
    return kExitOk;
}

inline int cmd_eval(const ConfigOptions& options) {
    json config = detail::load_json_file(options.config_path);
    detail::ExpContext ctx =
        detail::make_context(config, options.out_dir, options.seed_override, options.verbose);

    model::ModelParams params =
        model::load_checkpoint(ctx.config.at("checkpoint").get<std::string>());
    Corpus corpus = load_corpus(ctx.config.at("corpus").get<std::string>());
    experiments::EvalOutcome outcome = experiments::evaluate(params, corpus, ctx.table);

    json result = detail::stamped(ctx, json{{"corpus", corpus.name}, {"outcome", outcome}});
    std::ostringstream tsv;
    tsv << detail::tsv_header(ctx.hash, ctx.master_seed) << "corpus\taccuracy\tcorrect\ttotal\n"
        << corpus.name << '\t' << detail::format_double(outcome.accuracy_percent) << '\t'
        << outcome.confusion.trace() << '\t' << outcome.confusion.total() << '\n';

    detail::OutputSet outputs;
    outputs.add_json(ctx.out / "eval_result.json", result);
    outputs.add_text(ctx.out / "eval_result.tsv", tsv.str());
    outputs.write_all();
    return kExitOk;
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

namespace detail {

// Natural-corpus base model: from a checkpoint when given, trained otherwise.
inline model::ModelParams natural_base(const ExpContext& ctx,
                                       const compgen::CorpusSplits& natural) {
    if (ctx.config.contains("base_checkpoint"))
        return model::load_checkpoint(ctx.config.at("base_checkpoint").get<std::string>());
    model::TrainConfig tconfig = train_config_of(ctx, "base_train", "base_train");
    ctx.log("training natural base model");
    return model::train(natural.train, natural.val, model::zero_params(ctx.model_config), tconfig,
                        ctx.table, model::TrainMode::Fresh)
        .params;
}

inline int exp_finetune(ExpContext& ctx) {
    compgen::CorpusSplits comparisons = make_comparisons(ctx);
    compgen::CorpusSplits natural = make_natural(ctx);
    model::ModelParams base = natural_base(ctx, natural);
    model::TrainConfig tconfig = train_config_of(ctx, "train", "finetune");

    ctx.log("fine-tuning on comparisons");
    experiments::ExperimentResult result =
        experiments::run_finetune(base, comparisons, natural.test, tconfig, ctx.table);
    result.config_snapshot = ctx.config;

    detail::OutputSet outputs;
    outputs.add_json(ctx.out / "finetune_result.json", stamped(ctx, json{{"result", result}}));
    outputs.add_text(ctx.out / "finetune_table.tsv", results_tsv(ctx, {&result}));
    outputs.write_all();
    return kExitOk;
}

inline int exp_retrain(ExpContext& ctx) {
    compgen::CorpusSplits comparisons = make_comparisons(ctx);
    compgen::CorpusSplits natural = make_natural(ctx);
    model::TrainConfig tconfig = train_config_of(ctx, "train", "retrain");

    ctx.log("joint retraining");
    experiments::RetrainOutcome joint =
        experiments::run_retrain(natural, comparisons, ctx.model_config, tconfig, ctx.table);

    // Natural-only baseline with the same protocol, for the degradation delta.
    model::TrainConfig baseline_config = tconfig;
    baseline_config.seed = derive_seed(tconfig.seed, "baseline");
    ctx.log("training natural-only baseline");
    model::ModelParams baseline =
        model::train(natural.train, natural.val, model::zero_params(ctx.model_config),
                     baseline_config, ctx.table, model::TrainMode::Fresh)
            .params;
    joint.result.add_eval("baseline/natural_test",
                          experiments::evaluate(baseline, natural.test, ctx.table));
    joint.result.add_eval("baseline/comparisons_test",
                          experiments::evaluate(baseline, comparisons.test, ctx.table));
    joint.result.metrics["natural_test_delta"] =
        joint.result.at("baseline/natural_test").accuracy_percent -
        joint.result.at("natural_test").accuracy_percent;
    joint.result.config_snapshot = ctx.config;

    detail::OutputSet outputs;
    outputs.add_json(ctx.out / "retrain_result.json", stamped(ctx, json{{"result", joint.result}}));
    outputs.add_text(ctx.out / "retrain_table.tsv", results_tsv(ctx, {&joint.result}));
    outputs.write_all();
    return kExitOk;
}

inline int exp_zeroshot(ExpContext& ctx) {
    compgen::CorpusSplits comparisons = make_comparisons(ctx);
    compgen::CorpusSplits natural = make_natural(ctx);
    model::TrainConfig tconfig = train_config_of(ctx, "train", "retrain");

    ctx.log("joint retraining (augmented model)");
    experiments::RetrainOutcome joint =
        experiments::run_retrain(natural, comparisons, ctx.model_config, tconfig, ctx.table);

    model::TrainConfig baseline_config = tconfig;
    baseline_config.seed = derive_seed(tconfig.seed, "baseline");
    ctx.log("training unaugmented baseline");
    model::ModelParams baseline =
        model::train(natural.train, natural.val, model::zero_params(ctx.model_config),
                     baseline_config, ctx.table, model::TrainMode::Fresh)
            .params;

    const std::size_t zs_pairs =
        ctx.config.contains("zero_shot")
            ? ctx.config.at("zero_shot").value("pairs_per_subtype", std::size_t{300})
            : std::size_t{300};
    const std::uint64_t zs_seed =
        ctx.config.contains("zero_shot")
            ? seed_or(ctx.config.at("zero_shot"), "seed", ctx.master_seed, "zero_shot")
            : derive_seed(ctx.master_seed, "zero_shot");

    auto train_vocab = exposure_vocabulary(
        {&natural.train, &natural.val, &comparisons.train, &comparisons.val});
    compgen::ZeroShotSets sets =
        compgen::build_zero_shot_sets(ctx.lexicon, train_vocab, ctx.table, zs_pairs, zs_seed);

    ctx.log("evaluating zero-shot sets");
    experiments::ExperimentResult result =
        experiments::run_zero_shot(joint.params, baseline, sets, train_vocab, ctx.table);
    // Carry the retrain evals so one run documents both training outcomes.
    for (const auto& [name, outcome] : joint.result.evals)
        result.add_eval("retrain/" + name, outcome);
    result.add_eval("retrain/baseline_natural_test",
                    experiments::evaluate(baseline, natural.test, ctx.table));
    result.add_eval("retrain/baseline_comparisons_test",
                    experiments::evaluate(baseline, comparisons.test, ctx.table));
    result.metrics["natural_test_delta"] =
        result.at("retrain/baseline_natural_test").accuracy_percent -
        result.at("retrain/natural_test").accuracy_percent;
    result.training_log = joint.result.training_log;
    result.config_snapshot = ctx.config;

    detail::OutputSet outputs;
    outputs.add_json(ctx.out / "zeroshot_result.json", stamped(ctx, json{{"result", result}}));
    outputs.add_text(ctx.out / "zeroshot_table.tsv", results_tsv(ctx, {&result}));
    outputs.write_all();
    return kExitOk;
}

inline int exp_typeviolation(ExpContext& ctx) {
    compgen::CorpusSplits comparisons = make_comparisons(ctx);
    compgen::CorpusSplits natural = make_natural(ctx);
    model::TrainConfig tconfig = train_config_of(ctx, "train", "retrain");

    model::ModelParams params = [&] {
        if (ctx.config.contains("checkpoint"))
            return model::load_checkpoint(ctx.config.at("checkpoint").get<std::string>());
        ctx.log("joint retraining (augmented model)");
        return experiments::run_retrain(natural, comparisons, ctx.model_config, tconfig, ctx.table)
            .params;
    }();

    const std::size_t pairs =
        ctx.config.contains("type_violation")
            ? ctx.config.at("type_violation").value("pairs_per_subtype", std::size_t{300})
            : std::size_t{300};
    const std::uint64_t seed =
        ctx.config.contains("type_violation")
            ? seed_or(ctx.config.at("type_violation"), "seed", ctx.master_seed, "type_violation")
            : derive_seed(ctx.master_seed, "type_violation");

    Corpus violation = compgen::build_type_violation_set(ctx.train_lexicon, pairs, seed);
    auto train_vocab = exposure_vocabulary(
        {&natural.train, &natural.val, &comparisons.train, &comparisons.val});
    compgen::ZeroShotSets sets = compgen::build_zero_shot_sets(ctx.lexicon, train_vocab, ctx.table,
                                                               pairs, derive_seed(seed, "control"));

    experiments::ExperimentResult result =
        experiments::run_type_violation(params, violation, sets.held_out_nouns, ctx.table);
    result.config_snapshot = ctx.config;

    detail::OutputSet outputs;
    outputs.add_json(ctx.out / "typeviolation_result.json",
                     stamped(ctx, json{{"result", result}}));
    outputs.add_text(ctx.out / "typeviolation_table.tsv", results_tsv(ctx, {&result}));
    outputs.write_all();
    return kExitOk;
}

inline int exp_biasedexposure(ExpContext& ctx) {
    compgen::BiasedExposureSpec spec;
    if (!ctx.config.contains("biased_exposure"))
        throw ConfigError("config needs a biased_exposure block");
    const json& block = ctx.config.at("biased_exposure");
    spec.tokens_per_group = block.at("tokens_per_group").get<std::size_t>();
    spec.cell_train_size = block.at("cell_train_size").get<std::size_t>();
    spec.cell_test_size = block.at("cell_test_size").get<std::size_t>();
    spec.validate();
    const std::uint64_t data_seed = seed_or(block, "seed", ctx.master_seed, "biased_exposure");

    model::TrainConfig tconfig = train_config_of(ctx, "train", "biased_train");
    model::TrainMode mode = model::TrainMode::Fresh;
    model::ModelParams base = model::zero_params(ctx.model_config);
    const std::string base_kind = ctx.config.value("base", "fresh");
    if (base_kind == "natural") {
        compgen::CorpusSplits natural = make_natural(ctx);
        base = natural_base(ctx, natural);
        mode = model::TrainMode::FineTune;
    } else if (base_kind == "checkpoint") {
        base = model::load_checkpoint(ctx.config.at("base_checkpoint").get<std::string>());
        mode = model::TrainMode::FineTune;
    } else if (base_kind != "fresh") {
        throw ConfigError("base must be one of fresh|natural|checkpoint");
    }

    ctx.log("running three biased-exposure conditions");
    experiments::BiasedExposureOutcome outcome = experiments::run_biased_exposure(
        spec, ctx.train_lexicon, data_seed, base, tconfig, mode, ctx.table);
    for (auto& result : outcome.results) result.config_snapshot = ctx.config;

    json result_json = stamped(ctx, json{{"results", outcome.results}, {"tying", outcome.tying}});
    detail::OutputSet outputs;
    outputs.add_json(ctx.out / "biasedexposure_result.json", result_json);
    outputs.add_text(ctx.out / "biasedexposure_table.tsv",
                     results_tsv(ctx, {&outcome.results[0], &outcome.results[1],
                                       &outcome.results[2]}));
    outputs.write_all();
    return kExitOk;
}

}  // namespace detail

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"finetune", "retrain", "zeroshot",
                                                   "typeviolation", "biasedexposure"};
    return names;
}

inline int cmd_experiment(const ConfigOptions& options) {
    json config = detail::load_json_file(options.config_path);
    const std::string name = config.value("experiment", "");
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        std::string known;
        for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
        throw ConfigError("unknown experiment \"" + name + "\"; valid names: " + known);
    }
    detail::ExpContext ctx =
        detail::make_context(config, options.out_dir, options.seed_override, options.verbose);
    if (name == "finetune") return detail::exp_finetune(ctx);
    if (name == "retrain") return detail::exp_retrain(ctx);
    if (name == "zeroshot") return detail::exp_zeroshot(ctx);
    if (name == "typeviolation") return detail::exp_typeviolation(ctx);
    return detail::exp_biasedexposure(ctx);
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"sysprobe: diagnostic datasets, corpus audits, and generalization "
                 "experiments for sentence-embedding NLI models"};
    app.require_subcommand(1);

    GenerateOptions generate;
    CLI::App* cmd_gen = app.add_subcommand("generate", "generate a comparisons dataset");
    cmd_gen->add_option("--spec", generate.spec_path, "generation spec JSON")->required();
    cmd_gen->add_option("--lexicon", generate.lexicon_path, "lexicon word lists")->required();
    cmd_gen->add_option("--out", generate.out_dir, "output directory")->required();
    cmd_gen->add_option("--seed", generate.seed_override, "seed override");
    cmd_gen->add_flag("--verbose", generate.verbose);

    AuditOptions audit;
    CLI::App* cmd_aud = app.add_subcommand("audit", "audit heuristic regularities in a corpus");
    cmd_aud->add_option("--corpus", audit.corpus_path, "labeled corpus JSONL")->required();
    cmd_aud->add_option("--thesaurus", audit.thesaurus_path, "thesaurus TSV")->required();
    cmd_aud->add_option("--reference", audit.reference_path,
                        "reference corpus for vocabulary divergence");
    cmd_aud->add_option("--out", audit.out_dir, "output directory")->required();
    cmd_aud->add_flag("--verbose", audit.verbose);

    ConfigOptions train_opts, eval_opts, experiment_opts;
    CLI::App* cmd_tr = app.add_subcommand("train", "train a model from a config file");
    cmd_tr->add_option("--config", train_opts.config_path, "train config JSON")->required();
    cmd_tr->add_option("--out", train_opts.out_dir, "output directory override");
    cmd_tr->add_option("--seed", train_opts.seed_override, "seed override");
    cmd_tr->add_flag("--verbose", train_opts.verbose);

    CLI::App* cmd_ev = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
    cmd_ev->add_option("--config", eval_opts.config_path, "eval config JSON")->required();
    cmd_ev->add_option("--out", eval_opts.out_dir, "output directory override");
    cmd_ev->add_option("--seed", eval_opts.seed_override, "seed override");
    cmd_ev->add_flag("--verbose", eval_opts.verbose);

    CLI::App* cmd_exp = app.add_subcommand("experiment", "run a named experiment from a config");
    cmd_exp->add_option("--config", experiment_opts.config_path, "experiment config JSON")
        ->required();
    cmd_exp->add_option("--out", experiment_opts.out_dir, "output directory override");
    cmd_exp->add_option("--seed", experiment_opts.seed_override, "seed override");
    cmd_exp->add_flag("--verbose", experiment_opts.verbose);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (cmd_gen->parsed()) return cmd_generate(generate);
        if (cmd_aud->parsed()) return cmd_audit(audit);
        if (cmd_tr->parsed()) return cmd_train(train_opts);
        if (cmd_ev->parsed()) return cmd_eval(eval_opts);
        if (cmd_exp->parsed()) return cmd_experiment(experiment_opts);
        std::cerr << "error: no subcommand\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace sysprobe::cli
