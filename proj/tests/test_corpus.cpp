#include <gtest/gtest.h>

#include <cctype>
#include <sstream>

#include "sysprobe/corpus.hpp"
#include "sysprobe/embedding.hpp"
#include "sysprobe/rng.hpp"

using namespace sysprobe;

namespace {

std::vector<std::string> toks(const Sentence& s) { return s.tokens; }

TEST(Tokenize, DetachesTerminalPunctuation) {
    EXPECT_EQ(toks(tokenize("The man is not smiling.")),
              (std::vector<std::string>{"the", "man", "is", "not", "smiling", "."}));
}

TEST(Tokenize, SingleToken) {
    EXPECT_EQ(toks(tokenize("A")), (std::vector<std::string>{"a"}));
}

TEST(Tokenize, ContractionsStayWhole) {
    EXPECT_EQ(toks(tokenize("doesn't")), (std::vector<std::string>{"doesn't"}));
    EXPECT_EQ(toks(tokenize("The man doesn't smile")),
              (std::vector<std::string>{"the", "man", "doesn't", "smile"}));
}

TEST(Tokenize, HyphensAndPseudoWordsStayWhole) {
    EXPECT_EQ(toks(tokenize("a white t-shirt")),
              (std::vector<std::string>{"a", "white", "t-shirt"}));
    EXPECT_EQ(toks(tokenize("the @madeup_3 is tall")),
              (std::vector<std::string>{"the", "@madeup_3", "is", "tall"}));
}

TEST(Tokenize, InteriorPunctuationSplits) {
    EXPECT_EQ(toks(tokenize("red,green")), (std::vector<std::string>{"red", ",", "green"}));
    EXPECT_EQ(toks(tokenize("\"stop!\"")),
              (std::vector<std::string>{"\"", "stop", "!", "\""}));
}

TEST(Tokenize, RejectsTextWithoutContent) {
    EXPECT_THROW(tokenize(""), EmptySentence);
    EXPECT_THROW(tokenize("   \t "), EmptySentence);
    EXPECT_THROW(tokenize("..."), EmptySentence);
}

// Property: any text with an alphanumeric character tokenizes to a nonempty
// sentence of lowercase, whitespace-free tokens.
TEST(Tokenize, PropertyLowercaseNonempty) {
    Rng rng(20240811);
    const std::string alphabet = "abcXYZ09 .,'!?-\t\"()";
    for (int trial = 0; trial < 500; ++trial) {
        std::string text;
        const std::size_t len = 1 + rng.bounded(30);
        for (std::size_t i = 0; i < len; ++i) text += alphabet[rng.bounded(alphabet.size())];
        bool has_alnum = false;
        for (char c : text)
            if (std::isalnum(static_cast<unsigned char>(c))) has_alnum = true;
        if (!has_alnum) continue;

        Sentence sentence = tokenize(text);
        ASSERT_FALSE(sentence.tokens.empty());
        for (const auto& token : sentence.tokens) {
            ASSERT_FALSE(token.empty());
            for (char c : token) {
                ASSERT_FALSE(std::isspace(static_cast<unsigned char>(c)));
                ASSERT_FALSE(std::isupper(static_cast<unsigned char>(c)));
            }
        }
    }
}

TEST(Sentence, InvariantsEnforced) {
    EXPECT_THROW(Sentence(std::vector<std::string>{}), EmptySentence);
    EXPECT_THROW(Sentence({"two words"}), ParseError);
}

std::string canonical_file() {
    return
        R"({"hypothesis":"the man is more cheerful than the woman","label":"contradiction","pair_type":"same","premise":"the woman is more cheerful than the man"})"
        "\n"
        R"({"hypothesis":"people are watching a ball game","label":"contradiction","pair_type":"natural","premise":"several people are trying to climb a ladder in a tree"})"
        "\n"
        R"({"hypothesis":"a dog runs","pair_type":"natural","premise":"a dog runs fast"})"
        "\n";
}

TEST(CorpusIo, LoadsThreeRecords) {
    std::istringstream in(canonical_file());
    Corpus corpus = load_corpus_stream(in, "demo");
    ASSERT_EQ(corpus.size(), 3u);
    EXPECT_EQ(corpus.pairs[0].label, Label::Contradiction);
    EXPECT_EQ(corpus.pairs[0].pair_type, PairType::Same);
    EXPECT_EQ(corpus.pairs[1].pair_type, PairType::Natural);
    EXPECT_FALSE(corpus.pairs[2].label.has_value());
    EXPECT_EQ(corpus.pairs[0].premise.text(), "the woman is more cheerful than the man");
}

TEST(CorpusIo, UnknownLabelReportsLine) {
    std::istringstream in(
        R"({"premise":"a dog runs","hypothesis":"a dog moves","label":"entailment"})"
        "\n"
        R"({"premise":"a dog runs","hypothesis":"a cat sits","label":"maybe"})"
        "\n");
    try {
        load_corpus_stream(in, "bad");
        FAIL() << "expected LabelError";
    } catch (const LabelError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(CorpusIo, MalformedLineReportsLine) {
    std::istringstream in(
        R"({"premise":"a dog runs","hypothesis":"a dog moves","label":"entailment"})"
        "\n"
        "not json at all\n");
    try {
        load_corpus_stream(in, "bad");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(CorpusIo, RoundTripByteIdenticalOnCanonicalFiles) {
    std::istringstream in(canonical_file());
    Corpus corpus = load_corpus_stream(in, "demo");
    std::string saved = corpus_to_string(corpus);
    std::istringstream again(saved);
    Corpus corpus2 = load_corpus_stream(again, "demo");
    EXPECT_EQ(corpus_to_string(corpus2), saved);
    EXPECT_EQ(corpus.pairs, corpus2.pairs);
}

TEST(CorpusIo, EmptyAndSingleton) {
    Corpus empty;
    EXPECT_EQ(corpus_to_string(empty), "");

    Corpus one;
    one.pairs.push_back({tokenize("a dog runs"), tokenize("a dog moves"), Label::Entailment,
                         PairType::Natural});
    std::string text = corpus_to_string(one);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
}

// Round-trip oracle: load(save(corpus)) == corpus for corpora built from
// tokenize()d text.
TEST(CorpusIo, SaveLoadIdentityProperty) {
    Rng rng(7);
    const std::vector<std::string> words = {"the",  "a",    "man",   "woman", "dog",
                                            "runs", "sits", "small", "doesn't", "t-shirt"};
    Corpus corpus;
    corpus.name = "random";
    for (int i = 0; i < 50; ++i) {
        std::string premise, hypothesis;
        for (int j = 0; j < 4; ++j) premise += words[rng.bounded(words.size())] + " ";
        for (int j = 0; j < 3; ++j) hypothesis += words[rng.bounded(words.size())] + " ";
        SentencePair pair{tokenize(premise), tokenize(hypothesis), std::nullopt,
                          PairType::Natural};
        if (rng.bounded(4) != 0)
            pair.label = static_cast<Label>(rng.bounded(3));
        corpus.pairs.push_back(std::move(pair));
    }
    std::string saved = corpus_to_string(corpus);
    std::istringstream in(saved);
    Corpus loaded = load_corpus_stream(in, "random");
    EXPECT_EQ(loaded.pairs, corpus.pairs);
}

TEST(Embeddings, ParsesEntries) {
    std::istringstream in("cat 0.1 0.2\ndog -1 2.5\n");
    EmbeddingTable table = load_embeddings_stream(in, 2);
    ASSERT_EQ(table.size(), 2u);
    const Eigen::VectorXd* cat = table.lookup("cat");
    ASSERT_NE(cat, nullptr);
    EXPECT_DOUBLE_EQ((*cat)[0], 0.1);
    EXPECT_DOUBLE_EQ((*cat)[1], 0.2);
    EXPECT_EQ(table.lookup("bird"), nullptr);
}

TEST(Embeddings, WrongFieldCountIsParseError) {
    std::istringstream extra("cat 0.1 0.2 0.3\n");
    EXPECT_THROW(load_embeddings_stream(extra, 2), ParseError);
    std::istringstream missing("cat 0.1\n");
    EXPECT_THROW(load_embeddings_stream(missing, 2), ParseError);
}

TEST(Embeddings, DuplicateWordLastWinsWithWarningCount) {
    std::istringstream in("cat 1 1\ncat 2 2\n");
    EmbeddingTable table = load_embeddings_stream(in, 2);
    EXPECT_EQ(table.size(), 1u);
    EXPECT_EQ(table.duplicates_replaced, 1u);
    EXPECT_DOUBLE_EQ((*table.lookup("cat"))[0], 2.0);
}

// Counting oracle: a synthetic 10-line file yields 10 entries of length dim.
TEST(Embeddings, SyntheticFileCounts) {
    std::ostringstream file;
    const int dim = 5;
    for (int i = 0; i < 10; ++i) {
        file << "w" << i;
        for (int j = 0; j < dim; ++j) file << ' ' << (0.1 * i + j);
        file << '\n';
    }
    std::istringstream in(file.str());
    EmbeddingTable table = load_embeddings_stream(in, dim);
    EXPECT_EQ(table.size(), 10u);
    for (const auto& [word, vec] : table.entries) {
        EXPECT_EQ(vec.size(), dim);
        EXPECT_TRUE(vec.allFinite());
    }
}

TEST(RandomEmbedding, DeterministicAndSized) {
    Eigen::VectorXd a = random_embedding(300, 42);
    Eigen::VectorXd b = random_embedding(300, 42);
    EXPECT_EQ(a.size(), 300);
    EXPECT_TRUE(a == b);
    Eigen::VectorXd c = random_embedding(300, 43);
    EXPECT_FALSE(a == c);
}

// Statistical oracle: per-coordinate mean and variance over 10,000 draws.
TEST(RandomEmbedding, GaussianStatistics) {
    const int dim = 8;
    const int n = 10000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd v = random_embedding(dim, 1000 + i);
        mean += v;
        sumsq += v.cwiseProduct(v);
    }
    mean /= n;
    for (int j = 0; j < dim; ++j) {
        double var = sumsq[j] / n - mean[j] * mean[j];
        EXPECT_GT(mean[j], -0.05);
        EXPECT_LT(mean[j], 0.05);
        EXPECT_GT(var, 0.9);
        EXPECT_LT(var, 1.1);
    }
}

TEST(SyntheticEmbeddings, OrderIndependentPerWord) {
    EmbeddingTable a = synthetic_embeddings({"cat", "dog"}, 4, 9);
    EmbeddingTable b = synthetic_embeddings({"dog", "bird", "cat"}, 4, 9);
    EXPECT_TRUE(*a.lookup("cat") == *b.lookup("cat"));
    EXPECT_TRUE(*a.lookup("dog") == *b.lookup("dog"));
}

}  // namespace
