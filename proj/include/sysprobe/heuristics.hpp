#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sysprobe/corpus.hpp"
#include "sysprobe/errors.hpp"

namespace sysprobe::heuristics {

// ---------------------------------------------------------------------------
// Thesaurus
// ---------------------------------------------------------------------------

// Synonym/antonym resource ingested from a TSV export. The antonym relation
// is symmetrized on load; self-antonym entries are dropped.
struct Thesaurus {
    std::unordered_map<std::string, std::unordered_set<std::string>> synonyms;
    std::unordered_map<std::string, std::unordered_set<std::string>> antonyms;

    void add_synonym(const std::string& word, const std::string& syn) {
        if (word != syn) synonyms[word].insert(syn);
    }

    void add_antonym(const std::string& word, const std::string& ant) {
        if (word == ant) return;
        antonyms[word].insert(ant);
        antonyms[ant].insert(word);
    }

    const std::unordered_set<std::string>* synonyms_of(const std::string& word) const {
        auto it = synonyms.find(word);
        return it == synonyms.end() ? nullptr : &it->second;
    }

    const std::unordered_set<std::string>* antonyms_of(const std::string& word) const {
        auto it = antonyms.find(word);
        return it == antonyms.end() ? nullptr : &it->second;
    }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& field) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(field);
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace detail

// TSV: `word<TAB>syn1,syn2,...<TAB>ant1,ant2,...`; either list may be empty.
inline Thesaurus load_thesaurus_stream(std::istream& in) {
    Thesaurus thesaurus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t tab1 = line.find('\t');
        if (tab1 == std::string::npos) throw ParseError("expected 3 tab-separated fields", line_no);
        std::size_t tab2 = line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos) throw ParseError("expected 3 tab-separated fields", line_no);
        std::string word = line.substr(0, tab1);
        if (word.empty()) throw ParseError("empty word", line_no);
        for (const auto& syn : detail::split_list(line.substr(tab1 + 1, tab2 - tab1 - 1)))
            thesaurus.add_synonym(word, syn);
        for (const auto& ant : detail::split_list(line.substr(tab2 + 1)))
            thesaurus.add_antonym(word, ant);
    }
    return thesaurus;
}

inline Thesaurus load_thesaurus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open thesaurus file: " + path);
    return load_thesaurus_stream(in);
}

// ---------------------------------------------------------------------------
// Per-pair features
// ---------------------------------------------------------------------------

// Jaccard overlap over word types: |types(P) & types(H)| / |types(P) | types(H)|.
inline double overlap_rate(const SentencePair& pair) {
    std::unordered_set<std::string> premise_types(pair.premise.tokens.begin(),
                                                  pair.premise.tokens.end());
    std::unordered_set<std::string> hypothesis_types(pair.hypothesis.tokens.begin(),
                                                     pair.hypothesis.tokens.end());
    std::size_t common = 0;
    for (const auto& word : premise_types)
        if (hypothesis_types.count(word)) ++common;
    const std::size_t total = premise_types.size() + hypothesis_types.size() - common;
    return total == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(total);
}

// One synonym hop then one antonym hop, checked in both directions:
// true iff some word of one sentence has an antonym (of itself or of one of
// its synonyms) among the other sentence's words.
inline bool antonym_present(const SentencePair& pair, const Thesaurus& thesaurus) {
    auto directed = [&thesaurus](const Sentence& a, const Sentence& b) {
        std::unordered_set<std::string> b_types(b.tokens.begin(), b.tokens.end());
        for (const auto& word : a.tokens) {
            if (const auto* ants = thesaurus.antonyms_of(word))
                for (const auto& ant : *ants)
                    if (b_types.count(ant)) return true;
            if (const auto* syns = thesaurus.synonyms_of(word))
                for (const auto& syn : *syns)
                    if (const auto* ants = thesaurus.antonyms_of(syn))
                        for (const auto& ant : *ants)
                            if (b_types.count(ant)) return true;
        }
        return false;
    };
    return directed(pair.premise, pair.hypothesis) || directed(pair.hypothesis, pair.premise);
}

// Negating n-grams: the tokens "no" and "not", plus any "n't" contraction.
inline bool negation_present(const Sentence& sentence) {
    for (const auto& token : sentence.tokens) {
        if (token == "no" || token == "not") return true;
        if (token.size() >= 3 && token.compare(token.size() - 3, 3, "n't") == 0) return true;
    }
    return false;
}

inline bool negation_present(const SentencePair& pair) {
    return negation_present(pair.premise) || negation_present(pair.hypothesis);
}

// ---------------------------------------------------------------------------
// Overlap ranking
// ---------------------------------------------------------------------------

struct TopKRow {
    std::size_t k = 0;
    bool is_all = false;
    std::array<double, 3> percent{};  // by Label order
};

struct OverlapRanking {
    std::vector<std::size_t> order;  // corpus indices, non-increasing overlap
    std::vector<double> rates;       // aligned with order
    std::vector<TopKRow> rows;       // one per requested K, then the All row
};

inline OverlapRanking rank_by_overlap(const Corpus& corpus,
                                      const std::vector<std::size_t>& top_ks) {
    if (corpus.empty()) throw EmptyCorpus("rank_by_overlap: empty corpus");
    for (std::size_t k : top_ks)
        if (k == 0 || k > corpus.size())
            throw RangeError("top K " + std::to_string(k) + " out of range for corpus of size " +
                             std::to_string(corpus.size()));
    for (const auto& pair : corpus.pairs)
        if (!pair.label) throw MissingLabel("rank_by_overlap requires a labeled corpus");

    OverlapRanking ranking;
    ranking.order.resize(corpus.size());
    std::vector<double> rate_of(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        ranking.order[i] = i;
        rate_of[i] = overlap_rate(corpus.pairs[i]);
    }
    // Ties keep original corpus order.
    std::stable_sort(ranking.order.begin(), ranking.order.end(),
                     [&rate_of](std::size_t a, std::size_t b) { return rate_of[a] > rate_of[b]; });
    ranking.rates.reserve(corpus.size());
    for (std::size_t idx : ranking.order) ranking.rates.push_back(rate_of[idx]);

    // Cumulative label counts along the ranking give every top-K row in one pass.
    std::vector<std::array<std::size_t, 3>> cumulative(corpus.size() + 1, {0, 0, 0});
    for (std::size_t r = 0; r < corpus.size(); ++r) {
        cumulative[r + 1] = cumulative[r];
        cumulative[r + 1][static_cast<int>(*corpus.pairs[ranking.order[r]].label)]++;
    }
    auto make_row = [&cumulative](std::size_t k, bool is_all) {
        TopKRow row;
        row.k = k;
        row.is_all = is_all;
        for (int lab = 0; lab < kNumLabels; ++lab)
            row.percent[lab] = 100.0 * static_cast<double>(cumulative[k][lab]) /
                               static_cast<double>(k);
        return row;
    };
    for (std::size_t k : top_ks) ranking.rows.push_back(make_row(k, false));
    ranking.rows.push_back(make_row(corpus.size(), true));
    return ranking;
}

// The k pairs ranked first by overlap, still in ranking order.
inline Corpus high_overlap_subset(const Corpus& corpus, std::size_t k) {
    if (k > corpus.size())
        throw RangeError("subset size " + std::to_string(k) + " exceeds corpus size " +
                         std::to_string(corpus.size()));
    OverlapRanking ranking = rank_by_overlap(corpus, {});
    Corpus subset;
    subset.name = corpus.name + "_top" + std::to_string(k);
    subset.seed = corpus.seed;
    subset.pairs.reserve(k);
    for (std::size_t r = 0; r < k; ++r) subset.pairs.push_back(corpus.pairs[ranking.order[r]]);
    return subset;
}

// ---------------------------------------------------------------------------
// Conditional-probability reports
// ---------------------------------------------------------------------------

struct HeuristicReport {
    std::string feature_name;
    std::size_t corpus_size = 0;
    std::array<std::size_t, 3> with_feature{};     // per label
    std::array<std::size_t, 3> without_feature{};  // per label
    std::array<std::optional<double>, 3> p_feature_given_label;
    std::array<std::optional<double>, 3> p_label_given_feature;

    std::size_t feature_total() const {
        return with_feature[0] + with_feature[1] + with_feature[2];
    }
    std::size_t label_total(int label) const {
        return with_feature[label] + without_feature[label];
    }
};

using PairPredicate = std::function<bool(const SentencePair&)>;

// Maximum-likelihood conditionals from exact counts. Labels with zero pairs
// (or a feature that never fires) yield absent probabilities, never 0/0.
inline HeuristicReport heuristic_report(const Corpus& corpus, const PairPredicate& feature,
                                        const std::string& feature_name) {
    if (corpus.empty()) throw EmptyCorpus("heuristic_report: empty corpus");
    HeuristicReport report;
    report.feature_name = feature_name;
    report.corpus_size = corpus.size();
    for (const auto& pair : corpus.pairs) {
        if (!pair.label) throw MissingLabel("heuristic_report requires a labeled corpus");
        const int label = static_cast<int>(*pair.label);
        (feature(pair) ? report.with_feature : report.without_feature)[label]++;
    }
    const std::size_t feature_total = report.feature_total();
    for (int label = 0; label < kNumLabels; ++label) {
        const std::size_t label_total = report.label_total(label);
        if (label_total > 0)
            report.p_feature_given_label[label] =
                static_cast<double>(report.with_feature[label]) / static_cast<double>(label_total);
        if (feature_total > 0)
            report.p_label_given_feature[label] =
                static_cast<double>(report.with_feature[label]) /
                static_cast<double>(feature_total);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Vocabulary distribution comparison
// ---------------------------------------------------------------------------

struct VocabDivergenceRow {
    std::string word;
    double rate_a = 0.0;
    double rate_b = 0.0;
    double abs_diff = 0.0;
};

// Per-word occurrence rates (token count / total tokens) in two corpora,
// sorted by descending absolute difference. Words missing from one corpus
// appear with rate 0.
inline std::vector<VocabDivergenceRow> vocab_divergence(const Corpus& corpus_a,
                                                        const Corpus& corpus_b) {
    if (corpus_a.empty() || corpus_b.empty())
        throw EmptyCorpus("vocab_divergence: empty corpus");
    auto count_tokens = [](const Corpus& corpus, std::unordered_map<std::string, std::size_t>& counts) {
        std::size_t total = 0;
        for (const auto& pair : corpus.pairs)
            for (const Sentence* sentence : {&pair.premise, &pair.hypothesis})
                for (const auto& token : sentence->tokens) {
                    counts[token]++;
                    ++total;
                }
        return total;
    };
    std::unordered_map<std::string, std::size_t> counts_a, counts_b;
    const double total_a = static_cast<double>(count_tokens(corpus_a, counts_a));
    const double total_b = static_cast<double>(count_tokens(corpus_b, counts_b));

    std::vector<VocabDivergenceRow> rows;
    for (const auto& [word, count] : counts_a) {
        VocabDivergenceRow row;
        row.word = word;
        row.rate_a = count / total_a;
        auto it = counts_b.find(word);
        row.rate_b = it == counts_b.end() ? 0.0 : it->second / total_b;
        row.abs_diff = std::abs(row.rate_a - row.rate_b);
        rows.push_back(std::move(row));
    }
    for (const auto& [word, count] : counts_b) {
        if (counts_a.count(word)) continue;
        VocabDivergenceRow row;
        row.word = word;
        row.rate_b = count / total_b;
        row.abs_diff = row.rate_b;
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const VocabDivergenceRow& a, const VocabDivergenceRow& b) {
        if (a.abs_diff != b.abs_diff) return a.abs_diff > b.abs_diff;
        return a.word < b.word;
    });
    return rows;
}

}  // namespace sysprobe::heuristics
