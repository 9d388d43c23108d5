#include <gtest/gtest.h>

#include <cstdio>
#include <limits>
#include <filesystem>
#include <fstream>

#include "sysprobe/compgen.hpp"
#include "sysprobe/trainer.hpp"

using namespace sysprobe;
using namespace sysprobe::model;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("sysprobe_trainer_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

Lexicon tiny_lexicon() {
    Lexicon lex;
    lex.nouns = {"woman", "man", "dog", "cat", "teacher", "doctor", "bird", "child"};
    lex.adjectives = {"cheerful", "tall", "quiet", "happy"};
    lex.np_adjectives = {"grumpy"};
    lex.np_nouns = {"man"};
    lex.np_preps = {"near"};
    return lex;
}

EmbeddingTable lexicon_table(const Lexicon& lex, int dim, std::uint64_t seed) {
    std::vector<std::string> words = {"the", "is", "more", "less", "not", "than"};
    words.insert(words.end(), lex.nouns.begin(), lex.nouns.end());
    words.insert(words.end(), lex.adjectives.begin(), lex.adjectives.end());
    return synthetic_embeddings(words, dim, seed);
}

ModelConfig small_config() {
    ModelConfig config;
    config.kind = EncoderKind::Recurrent;
    config.input_dim = 8;
    config.hidden_dim = 8;
    config.cell = CellKind::Gated;
    config.classifier_hidden_dim = 16;
    return config;
}

compgen::CorpusSplits small_dataset(std::uint64_t seed) {
    compgen::GenerationSpec spec;
    spec.pairs_per_subtype = 120;
    spec.seed = seed;
    Corpus corpus = compgen::generate_comparisons(spec, tiny_lexicon());
    return compgen::split_comparisons(corpus, {0.7, 0.15, 0.15}, seed);
}

TEST(Train, ZeroEpochsReturnsParamsUnchanged) {
    auto data = small_dataset(1);
    EmbeddingTable table = lexicon_table(tiny_lexicon(), 8, 5);
    ModelParams params0 = init_params(small_config(), 42);
    TrainConfig config;
    config.max_epochs = 0;

    TrainResult result = train(data.train, data.val, params0, config, table, TrainMode::FineTune);
    EXPECT_TRUE(result.log.empty());
    auto before = params0.array_refs();
    auto after = result.params.array_refs();
    ASSERT_EQ(before.size(), after.size());
    for (std::size_t a = 0; a < before.size(); ++a)
        for (Eigen::Index i = 0; i < before[a].size(); ++i)
            EXPECT_EQ(before[a].data[i], after[a].data[i]);
}

TEST(Train, SingleStepDecreasesLoss) {
    EmbeddingTable table = lexicon_table(tiny_lexicon(), 8, 5);
    Corpus one;
    one.pairs.push_back({tokenize("the dog is more tall than the cat"),
                         tokenize("the cat is less tall than the dog"), Label::Entailment,
                         PairType::MoreLess});
    ModelParams params0 = init_params(small_config(), 9);

    std::vector<EncodedPair> encoded = encode_corpus(one, params0.config, table);
    const double before = loss_and_gradients(encoded, params0).loss;

    TrainConfig config;
    config.learning_rate = 0.05;
    config.batch_size = 1;
    config.max_epochs = 1;
    TrainResult result = train(one, one, params0, config, table, TrainMode::FineTune);
    const double after = loss_and_gradients(encoded, result.params).loss;
    EXPECT_LT(after, before);
}

TEST(Train, DeterministicGivenSeed) {
    auto data = small_dataset(2);
    EmbeddingTable table = lexicon_table(tiny_lexicon(), 8, 5);
    ModelParams params0 = zero_params(small_config());
    TrainConfig config;
    config.max_epochs = 3;
    config.batch_size = 16;
    config.seed = 77;

    TrainResult a = train(data.train, data.val, params0, config, table, TrainMode::Fresh);
    TrainResult b = train(data.train, data.val, params0, config, table, TrainMode::Fresh);
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t e = 0; e < a.log.size(); ++e) {
        EXPECT_EQ(a.log[e].mean_loss, b.log[e].mean_loss);
        EXPECT_EQ(a.log[e].train_accuracy, b.log[e].train_accuracy);
        EXPECT_EQ(a.log[e].val_accuracy, b.log[e].val_accuracy);
        EXPECT_EQ(a.log[e].learning_rate, b.log[e].learning_rate);
    }
    auto ra = a.params.array_refs(), rb = b.params.array_refs();
    for (std::size_t i = 0; i < ra.size(); ++i)
        for (Eigen::Index k = 0; k < ra[i].size(); ++k)
            EXPECT_EQ(ra[i].data[k], rb[i].data[k]);

    config.seed = 78;
    TrainResult c = train(data.train, data.val, params0, config, table, TrainMode::Fresh);
    EXPECT_NE(a.log.back().mean_loss, c.log.back().mean_loss);
}

TEST(Train, OverfitsTinyTrainingSet) {
    auto data = small_dataset(3);
    Corpus eight;
    eight.pairs.assign(data.train.pairs.begin(), data.train.pairs.begin() + 8);
    EmbeddingTable table = lexicon_table(tiny_lexicon(), 8, 5);
    ModelParams params0 = zero_params(small_config());
    TrainConfig config;
    config.learning_rate = 0.2;
    config.batch_size = 4;
    config.max_epochs = 120;
    config.seed = 4;

    TrainResult result = train(eight, eight, params0, config, table, TrainMode::Fresh);
    EXPECT_EQ(result.log.back().train_accuracy, 100.0);
}

TEST(Train, NonFiniteLossRaisesNumericalError) {
    auto data = small_dataset(4);
    EmbeddingTable table = lexicon_table(tiny_lexicon(), 8, 5);
    ModelParams params0 = init_params(small_config(), 6);
    params0.classifier.b_out[0] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig config;
    config.max_epochs = 2;
    try {
        train(data.train, data.val, params0, config, table, TrainMode::FineTune);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_EQ(e.epoch(), 1u);
        EXPECT_EQ(e.batch(), 0u);
    }
}

TEST(Train, CountsOovEncodings) {
    EmbeddingTable table = lexicon_table(tiny_lexicon(), 8, 5);
    Corpus corpus;
    corpus.pairs.push_back({tokenize("the dog is more tall than the zzz"),
                            tokenize("the zzz is less tall than the dog"), Label::Entailment,
                            PairType::MoreLess});
    ModelParams params0 = init_params(small_config(), 9);
    TrainConfig config;
    config.max_epochs = 1;
    config.batch_size = 1;
    TrainResult result = train(corpus, corpus, params0, config, table, TrainMode::FineTune);
    EXPECT_EQ(result.oov_encodings, 4u);  // two sentences in train cache + two in val cache
}

TEST(Checkpoint, RoundTripIsBitExact) {
    TempDir dir;
    ModelParams params = init_params(small_config(), 31);
    params.init_seed = 31;
    save_checkpoint(params, dir.file("model.ckpt"));
    ModelParams loaded = load_checkpoint(dir.file("model.ckpt"));

    EXPECT_EQ(loaded.init_seed, params.init_seed);
    EXPECT_EQ(loaded.config.hidden_dim, params.config.hidden_dim);
    auto a = params.array_refs(), b = loaded.array_refs();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].name, b[i].name);
        for (Eigen::Index k = 0; k < a[i].size(); ++k)
            EXPECT_EQ(a[i].data[k], b[i].data[k]) << a[i].name << "[" << k << "]";
    }

    // Loaded parameters reproduce identical classifier outputs.
    EmbeddingTable table = lexicon_table(tiny_lexicon(), 8, 5);
    Sentence premise = tokenize("the dog is more tall than the cat");
    Sentence hypothesis = tokenize("the cat is less tall than the dog");
    Eigen::Vector3d p1 = classify_pair(rnn_encode(premise, params, table),
                                       rnn_encode(hypothesis, params, table), params);
    Eigen::Vector3d p2 = classify_pair(rnn_encode(premise, loaded, table),
                                       rnn_encode(hypothesis, loaded, table), loaded);
    EXPECT_TRUE(p1 == p2);
}

TEST(Checkpoint, CorruptAndMismatchedFilesRejected) {
    TempDir dir;
    std::ofstream(dir.file("garbage.ckpt")) << "{ not json";
    EXPECT_THROW(load_checkpoint(dir.file("garbage.ckpt")), CheckpointError);

    std::ofstream(dir.file("other.json")) << "{\"format\":\"something-else\"}";
    EXPECT_THROW(load_checkpoint(dir.file("other.json")), CheckpointError);

    ModelParams params = init_params(small_config(), 1);
    nlohmann::json j = checkpoint_to_json(params);
    j["version"] = 999;
    std::ofstream(dir.file("future.ckpt")) << j.dump();
    EXPECT_THROW(load_checkpoint(dir.file("future.ckpt")), VersionError);

    nlohmann::json truncated = checkpoint_to_json(params);
    truncated["arrays"].erase("cls.w_out");
    std::ofstream(dir.file("missing.ckpt")) << truncated.dump();
    EXPECT_THROW(load_checkpoint(dir.file("missing.ckpt")), CheckpointError);

    EXPECT_THROW(load_checkpoint(dir.file("nonexistent.ckpt")), IoError);
}

}  // namespace
