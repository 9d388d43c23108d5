#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sysprobe/corpus.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct Workspace {
    fs::path root;
    Workspace() {
        root = fs::temp_directory_path() / ("sysprobe_cli_" + std::to_string(::getpid()));
        fs::create_directories(root);
    }
    ~Workspace() { fs::remove_all(root); }
    std::string path(const std::string& name) const { return (root / name).string(); }
};

CliRun run_cli(const Workspace& ws, const std::string& args) {
    const std::string out_file = ws.path("cli_stdout.txt");
    const std::string err_file = ws.path("cli_stderr.txt");
    const std::string command = std::string(SYSPROBE_CLI_BINARY) + " " + args + " > " + out_file +
                                " 2> " + err_file;
    const int status = std::system(command.c_str());
    CliRun run;
    run.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    run.out = slurp(out_file);
    run.err = slurp(err_file);
    return run;
}

std::string data_file(const std::string& name) {
    return (fs::path(SYSPROBE_DATA_DIR) / name).string();
}

void write_file(const std::string& path, const std::string& content) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::trunc);
    out << content;
}

std::size_t line_count(const std::string& path) {
    std::ifstream in(path);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

TEST(CliGenerate, WritesSplitsAndManifestWithMatchingCounts) {
    Workspace ws;
    write_file(ws.path("spec.json"),
               R"({"pairs_per_subtype": 100, "seed": 3, "split": [0.8, 0.1, 0.1]})");
    CliRun run = run_cli(ws, "generate --spec " + ws.path("spec.json") + " --lexicon " +
                                 data_file("lexicon_default.txt") + " --out " + ws.path("gen"));
    ASSERT_EQ(run.exit_code, 0) << run.err;

    for (const char* name : {"train.jsonl", "val.jsonl", "test.jsonl", "manifest.json"})
        EXPECT_TRUE(fs::exists(fs::path(ws.path("gen")) / name)) << name;

    // Recount oracle: manifest counts equal actual file line counts.
    json manifest = json::parse(slurp(ws.path("gen/manifest.json")));
    EXPECT_EQ(manifest["seed"], 3);
    EXPECT_FALSE(manifest["config_hash"].get<std::string>().empty());
    for (const char* split : {"train", "val", "test"})
        EXPECT_EQ(manifest["counts"][split]["pairs"].get<std::size_t>(),
                  line_count(ws.path(std::string("gen/") + split + ".jsonl")))
            << split;

    // All files parse back as corpora.
    sysprobe::Corpus train = sysprobe::load_corpus(ws.path("gen/train.jsonl"));
    EXPECT_EQ(train.size(), manifest["counts"]["train"]["pairs"].get<std::size_t>());
}

TEST(CliGenerate, MissingLexiconFailsWithoutPartialOutput) {
    Workspace ws;
    write_file(ws.path("spec.json"), R"({"pairs_per_subtype": 10, "seed": 1})");
    CliRun run = run_cli(ws, "generate --spec " + ws.path("spec.json") +
                                 " --lexicon /nonexistent/lexicon.txt --out " + ws.path("gen"));
    EXPECT_NE(run.exit_code, 0);
    EXPECT_FALSE(fs::exists(ws.path("gen/train.jsonl")));
    EXPECT_FALSE(fs::exists(ws.path("gen/manifest.json")));
}

// A balanced planted corpus: every label equally frequent.
std::string planted_corpus_jsonl() {
    std::ostringstream out;
    const char* nouns[6] = {"dog", "cat", "bird", "fox", "cow", "pig"};
    for (int i = 0; i < 6; ++i) {
        out << R"({"premise":"the )" << nouns[i] << R"( runs","hypothesis":"the )" << nouns[i]
            << R"( moves","label":"entailment"})" << "\n";
        out << R"({"premise":"the )" << nouns[i] << R"( runs","hypothesis":"the )" << nouns[i]
            << R"( runs outside","label":"neutral"})" << "\n";
        out << R"({"premise":"the )" << nouns[i] << R"( runs","hypothesis":"the )" << nouns[i]
            << R"( is not running","label":"contradiction"})" << "\n";
    }
    return out.str();
}

TEST(CliAudit, BalancedCorpusAllRowAndFormatAgreement) {
    Workspace ws;
    write_file(ws.path("corpus.jsonl"), planted_corpus_jsonl());
    CliRun run = run_cli(ws, "audit --corpus " + ws.path("corpus.jsonl") + " --thesaurus " +
                                 data_file("thesaurus_default.tsv") + " --out " + ws.path("audit"));
    ASSERT_EQ(run.exit_code, 0) << run.err;

    json overlap = json::parse(slurp(ws.path("audit/overlap_ranking.json")));
    const auto& all_row = overlap["rows"].back();
    ASSERT_EQ(all_row["top"], "all");
    EXPECT_NEAR(all_row["entailment"].get<double>(), 100.0 / 3.0, 0.1);
    EXPECT_NEAR(all_row["neutral"].get<double>(), 100.0 / 3.0, 0.1);
    EXPECT_NEAR(all_row["contradiction"].get<double>(), 100.0 / 3.0, 0.1);

    // TSV numbers equal JSON numbers.
    std::istringstream tsv(slurp(ws.path("audit/overlap_ranking.tsv")));
    std::string line;
    std::getline(tsv, line);  // hash header
    std::getline(tsv, line);  // column header
    std::size_t row_index = 0;
    while (std::getline(tsv, line)) {
        std::istringstream fields(line);
        std::string top;
        double e, n, c;
        fields >> top >> e >> n >> c;
        const auto& jrow = overlap["rows"][row_index++];
        EXPECT_DOUBLE_EQ(e, jrow["entailment"].get<double>());
        EXPECT_DOUBLE_EQ(n, jrow["neutral"].get<double>());
        EXPECT_DOUBLE_EQ(c, jrow["contradiction"].get<double>());
    }
    EXPECT_EQ(row_index, overlap["rows"].size());

    json negation = json::parse(slurp(ws.path("audit/negation_report.json")));
    EXPECT_DOUBLE_EQ(
        negation["subsets"]["full"]["labels"]["contradiction"]["p_feature_given_label"]
            .get<double>(),
        1.0);
}

TEST(CliAudit, UnlabeledCorpusNamesOffendingLine) {
    Workspace ws;
    write_file(ws.path("corpus.jsonl"),
               R"({"premise":"a dog runs","hypothesis":"a dog moves","label":"entailment"})"
               "\n"
               R"({"premise":"a dog runs","hypothesis":"a cat sits"})"
               "\n");
    CliRun run = run_cli(ws, "audit --corpus " + ws.path("corpus.jsonl") + " --thesaurus " +
                                 data_file("thesaurus_default.tsv") + " --out " + ws.path("audit"));
    EXPECT_EQ(run.exit_code, 2);
    EXPECT_NE(run.err.find("line 2"), std::string::npos) << run.err;
}

json micro_model() {
    return json{{"kind", "recurrent"}, {"input_dim", 10},          {"hidden_dim", 6},
                {"cell", "gated"},     {"classifier_hidden_dim", 8}};
}

TEST(CliTrainEval, MemorizedTinySetScoresHundred) {
    Workspace ws;
    write_file(ws.path("spec.json"), R"({"pairs_per_subtype": 4, "seed": 31, "split": [1, 0, 0]})");
    CliRun gen = run_cli(ws, "generate --spec " + ws.path("spec.json") + " --lexicon " +
                                 data_file("lexicon_default.txt") + " --out " + ws.path("gen"));
    ASSERT_EQ(gen.exit_code, 0) << gen.err;

    json train_config = {
        {"lexicon", data_file("lexicon_default.txt")},
        {"embeddings", {{"synthetic", {{"dim", 10}, {"seed", 5}}}}},
        {"model", micro_model()},
        {"data", {{"train", ws.path("gen/train.jsonl")}, {"val", ws.path("gen/train.jsonl")}}},
        {"train",
         {{"learning_rate", 0.2},
          {"lr_shrink", 1.0001},
          {"batch_size", 4},
          {"max_epochs", 400},
          {"seed", 3}}},
        {"out", ws.path("run")}};
    write_file(ws.path("train.json"), train_config.dump());
    CliRun train = run_cli(ws, "train --config " + ws.path("train.json"));
    ASSERT_EQ(train.exit_code, 0) << train.err;
    ASSERT_TRUE(fs::exists(ws.path("run/checkpoint.json")));

    json eval_config = {{"lexicon", data_file("lexicon_default.txt")},
                        {"embeddings", {{"synthetic", {{"dim", 10}, {"seed", 5}}}}},
                        {"model", micro_model()},
                        {"checkpoint", ws.path("run/checkpoint.json")},
                        {"corpus", ws.path("gen/train.jsonl")},
                        {"out", ws.path("eval")}};
    write_file(ws.path("eval.json"), eval_config.dump());
    CliRun eval = run_cli(ws, "eval --config " + ws.path("eval.json"));
    ASSERT_EQ(eval.exit_code, 0) << eval.err;

    json result = json::parse(slurp(ws.path("eval/eval_result.json")));
    EXPECT_DOUBLE_EQ(result["outcome"]["accuracy_percent"].get<double>(), 100.0);
}

TEST(CliExperiment, UnknownNameListsValidOnes) {
    Workspace ws;
    write_file(ws.path("bad.json"), R"({"experiment": "nonsense"})");
    CliRun run = run_cli(ws, "experiment --config " + ws.path("bad.json"));
    EXPECT_EQ(run.exit_code, 1);
    for (const char* name : {"finetune", "retrain", "zeroshot", "typeviolation", "biasedexposure"})
        EXPECT_NE(run.err.find(name), std::string::npos) << run.err;
}

TEST(CliExperiment, RerunReproducesOutputsByteForByte) {
    Workspace ws;
    json config = {{"experiment", "typeviolation"},
                   {"seed", 42},
                   {"lexicon", data_file("lexicon_default.txt")},
                   {"embeddings", {{"synthetic", {{"dim", 10}, {"seed", 5}}}}},
                   {"model", micro_model()},
                   {"comparisons", {{"pairs_per_subtype", 40}, {"split", {0.7, 0.15, 0.15}}}},
                   {"natural", {{"size", 120}}},
                   {"train", {{"max_epochs", 2}, {"batch_size", 32}}},
                   {"type_violation", {{"pairs_per_subtype", 20}}},
                   {"out", ws.path("out")}};
    write_file(ws.path("config.json"), config.dump());

    CliRun first = run_cli(ws, "experiment --config " + ws.path("config.json"));
    ASSERT_EQ(first.exit_code, 0) << first.err;
    const std::string result1 = slurp(ws.path("out/typeviolation_result.json"));
    const std::string table1 = slurp(ws.path("out/typeviolation_table.tsv"));
    ASSERT_FALSE(result1.empty());

    CliRun second = run_cli(ws, "experiment --config " + ws.path("config.json"));
    ASSERT_EQ(second.exit_code, 0) << second.err;
    EXPECT_EQ(slurp(ws.path("out/typeviolation_result.json")), result1);
    EXPECT_EQ(slurp(ws.path("out/typeviolation_table.tsv")), table1);
}

TEST(CliExperiment, SeedOverrideChangesOutputs) {
    Workspace ws;
    json config = {{"experiment", "typeviolation"},
                   {"seed", 42},
                   {"lexicon", data_file("lexicon_default.txt")},
                   {"embeddings", {{"synthetic", {{"dim", 10}, {"seed", 5}}}}},
                   {"model", micro_model()},
                   {"comparisons", {{"pairs_per_subtype", 40}, {"split", {0.7, 0.15, 0.15}}}},
                   {"natural", {{"size", 120}}},
                   {"train", {{"max_epochs", 1}, {"batch_size", 32}}},
                   {"type_violation", {{"pairs_per_subtype", 20}}},
                   {"out", ws.path("out")}};
    write_file(ws.path("config.json"), config.dump());

    CliRun first = run_cli(ws, "experiment --config " + ws.path("config.json"));
    ASSERT_EQ(first.exit_code, 0) << first.err;
    const std::string result1 = slurp(ws.path("out/typeviolation_result.json"));

    CliRun second = run_cli(ws, "experiment --config " + ws.path("config.json") + " --seed 43");
    ASSERT_EQ(second.exit_code, 0) << second.err;
    EXPECT_NE(slurp(ws.path("out/typeviolation_result.json")), result1);
}

}  // namespace
