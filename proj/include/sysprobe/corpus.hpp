#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sysprobe/errors.hpp"

namespace sysprobe {

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

enum class Label { Entailment = 0, Neutral = 1, Contradiction = 2 };

inline constexpr int kNumLabels = 3;

inline const char* label_name(Label label) {
    switch (label) {
        case Label::Entailment: return "entailment";
        case Label::Neutral: return "neutral";
        case Label::Contradiction: return "contradiction";
    }
    return "?";
}

inline Label label_from_name(std::string_view name, std::size_t line = 0) {
    if (name == "entailment") return Label::Entailment;
    if (name == "neutral") return Label::Neutral;
    if (name == "contradiction") return Label::Contradiction;
    throw LabelError("unknown label \"" + std::string(name) + "\"", line);
}

// ---------------------------------------------------------------------------
// Sentences
// ---------------------------------------------------------------------------

// Ordered lowercase tokens. Invariant: nonempty, no token contains whitespace.
struct Sentence {
    std::vector<std::string> tokens;

    Sentence() = default;
    explicit Sentence(std::vector<std::string> toks) : tokens(std::move(toks)) { validate(); }

    void validate() const {
        if (tokens.empty()) throw EmptySentence("sentence has no tokens");
        for (const auto& t : tokens) {
            if (t.empty()) throw EmptySentence("sentence contains an empty token");
            for (char c : t)
                if (std::isspace(static_cast<unsigned char>(c)))
                    throw ParseError("token \"" + t + "\" contains whitespace");
        }
    }

    std::size_t size() const { return tokens.size(); }

    std::string text() const {
        std::string out;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i) out += ' ';
            out += tokens[i];
        }
        return out;
    }

    bool operator==(const Sentence& other) const { return tokens == other.tokens; }
};

// Lowercase, split on whitespace, detach punctuation into separate tokens.
// Apostrophes and hyphens stay inside tokens so "doesn't" and "t-shirt"
// survive whole; '@' and '_' too, so generated pseudo-words round-trip.
inline Sentence tokenize(const std::string& text) {
    auto is_word_char = [](char c) {
        unsigned char u = static_cast<unsigned char>(c);
        return std::isalnum(u) || c == '\'' || c == '-' || c == '@' || c == '_' || u >= 0x80;
    };

    std::vector<std::string> tokens;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            tokens.push_back(word);
            word.clear();
        }
    };
    for (char c : text) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isspace(u)) {
            flush();
        } else if (is_word_char(c)) {
            word += static_cast<char>(std::tolower(u));
        } else {
            flush();
            tokens.push_back(std::string(1, c));
        }
    }
    flush();

    bool has_alnum = false;
    for (const auto& t : tokens)
        for (char c : t)
            if (std::isalnum(static_cast<unsigned char>(c))) has_alnum = true;
    if (!has_alnum) throw EmptySentence("text has no alphanumeric content: \"" + text + "\"");
    return Sentence(std::move(tokens));
}

// ---------------------------------------------------------------------------
// Sentence pairs and corpora
// ---------------------------------------------------------------------------

enum class PairType { Same, MoreLess, Not, Natural };

inline const char* pair_type_name(PairType type) {
    switch (type) {
        case PairType::Same: return "same";
        case PairType::MoreLess: return "more_less";
        case PairType::Not: return "not";
        case PairType::Natural: return "natural";
    }
    return "?";
}

inline PairType pair_type_from_name(std::string_view name, std::size_t line = 0) {
    if (name == "same") return PairType::Same;
    if (name == "more_less") return PairType::MoreLess;
    if (name == "not") return PairType::Not;
    if (name == "natural") return PairType::Natural;
    throw ParseError("unknown pair_type \"" + std::string(name) + "\"", line);
}

struct SentencePair {
    Sentence premise;
    Sentence hypothesis;
    std::optional<Label> label;  // absent for unlabeled inference input
    PairType pair_type = PairType::Natural;

    bool operator==(const SentencePair& other) const {
        return premise == other.premise && hypothesis == other.hypothesis &&
               label == other.label && pair_type == other.pair_type;
    }

    // Key for duplicate detection on (premise, hypothesis).
    std::string text_key() const { return premise.text() + '\t' + hypothesis.text(); }
};

struct Corpus {
    std::string name;
    std::vector<SentencePair> pairs;
    std::optional<std::uint64_t> seed;  // recorded when generated

    std::size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }
};

// ---------------------------------------------------------------------------
// Corpus file I/O: UTF-8 JSONL, one {"premise","hypothesis","label","pair_type"}
// object per line. Sentences are stored as space-joined canonical tokens;
// loading re-tokenizes, so raw SNLI-style text also ingests cleanly.
// ---------------------------------------------------------------------------

inline SentencePair pair_from_json(const nlohmann::json& record, std::size_t line = 0) {
    if (!record.is_object()) throw ParseError("record is not a JSON object", line);
    if (!record.contains("premise") || !record["premise"].is_string())
        throw ParseError("missing or non-string \"premise\"", line);
    if (!record.contains("hypothesis") || !record["hypothesis"].is_string())
        throw ParseError("missing or non-string \"hypothesis\"", line);

    SentencePair pair;
    try {
        pair.premise = tokenize(record["premise"].get<std::string>());
        pair.hypothesis = tokenize(record["hypothesis"].get<std::string>());
    } catch (const EmptySentence& e) {
        throw ParseError(e.what(), line);
    }
    if (record.contains("label") && !record["label"].is_null()) {
        if (!record["label"].is_string()) throw ParseError("non-string \"label\"", line);
        pair.label = label_from_name(record["label"].get<std::string>(), line);
    }
    if (record.contains("pair_type") && !record["pair_type"].is_null()) {
        if (!record["pair_type"].is_string()) throw ParseError("non-string \"pair_type\"", line);
        pair.pair_type = pair_type_from_name(record["pair_type"].get<std::string>(), line);
    }
    return pair;
}

inline nlohmann::json pair_to_json(const SentencePair& pair) {
    nlohmann::json record;
    record["premise"] = pair.premise.text();
    record["hypothesis"] = pair.hypothesis.text();
    if (pair.label) record["label"] = label_name(*pair.label);
    record["pair_type"] = pair_type_name(pair.pair_type);
    return record;
}

inline Corpus load_corpus_stream(std::istream& in, const std::string& name) {
    Corpus corpus;
    corpus.name = name;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded()) throw ParseError("invalid JSON", line_no);
        corpus.pairs.push_back(pair_from_json(record, line_no));
    }
    return corpus;
}

inline std::string corpus_stem(const std::string& path) {
    std::size_t slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    std::size_t dot = base.find_last_of('.');
    return dot == std::string::npos ? base : base.substr(0, dot);
}

inline Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);
    return load_corpus_stream(in, corpus_stem(path));
}

inline void save_corpus_stream(const Corpus& corpus, std::ostream& out) {
    for (const auto& pair : corpus.pairs) out << pair_to_json(pair).dump() << '\n';
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open corpus file for writing: " + path);
    save_corpus_stream(corpus, out);
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

inline std::string corpus_to_string(const Corpus& corpus) {
    std::ostringstream out;
    save_corpus_stream(corpus, out);
    return out.str();
}

}  // namespace sysprobe
