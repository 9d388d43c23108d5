#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "sysprobe/corpus.hpp"
#include "sysprobe/errors.hpp"
#include "sysprobe/heuristics.hpp"
#include "sysprobe/lexicon.hpp"
#include "sysprobe/rng.hpp"

namespace sysprobe::compgen {

// Synthetic natural-style NLI corpus. Desk-scale stand-in for a crowd-sourced
// corpus: three balanced labels, plus the structural regularities that make
// lexical heuristics ecologically valid there -- entailments keep high word
// overlap, contradictions tend to carry negations or antonym swaps, neutrals
// add unverifiable material.
struct NaturalSpec {
    std::size_t size = 0;  // total pairs; multiple of 3 (balanced labels)
    std::uint64_t seed = 0;
    double p_negation_given_contradiction = 0.35;
    double p_antonym_given_contradiction = 0.35;
    double p_negation_given_entailment = 0.02;

    void validate() const {
        if (size == 0 || size % 3 != 0) throw ConfigError("size must be a positive multiple of 3");
        for (double p : {p_negation_given_contradiction, p_antonym_given_contradiction,
                         p_negation_given_entailment})
            if (p < 0.0 || p > 1.0) throw ConfigError("probabilities must be in [0,1]");
        if (p_negation_given_contradiction + p_antonym_given_contradiction > 1.0)
            throw ConfigError("contradiction mechanism probabilities exceed 1");
    }
};

namespace detail {

// Adjectives are grouped in fours: {base, synonym-of-base, antonym, synonym-
// of-antonym}. The generator swaps within a group; the planted thesaurus
// exposes the same structure to the audit tools.
struct AdjectiveGroups {
    std::vector<std::string> words;  // 4 * n_groups entries
    std::size_t n_groups = 0;

    const std::string& base(std::size_t g) const { return words[4 * g]; }
    const std::string& synonym(std::size_t g) const { return words[4 * g + 1]; }
    const std::string& antonym(std::size_t g) const { return words[4 * g + 2]; }
    const std::string& antonym_synonym(std::size_t g) const { return words[4 * g + 3]; }
};

inline AdjectiveGroups adjective_groups(const Lexicon& lexicon) {
    AdjectiveGroups groups;
    groups.n_groups = lexicon.adjectives.size() / 4;
    if (groups.n_groups == 0)
        throw InsufficientLexicon("need at least 4 adjectives for natural generation");
    groups.words.assign(lexicon.adjectives.begin(),
                        lexicon.adjectives.begin() + 4 * groups.n_groups);
    return groups;
}

}  // namespace detail

// The synonym/antonym structure the natural generator plants, as a Thesaurus
// for the heuristic analyzers.
inline heuristics::Thesaurus natural_planted_thesaurus(const Lexicon& lexicon) {
    detail::AdjectiveGroups groups = detail::adjective_groups(lexicon);
    heuristics::Thesaurus thesaurus;
    for (std::size_t g = 0; g < groups.n_groups; ++g) {
        thesaurus.add_synonym(groups.base(g), groups.synonym(g));
        thesaurus.add_synonym(groups.synonym(g), groups.base(g));
        thesaurus.add_synonym(groups.antonym(g), groups.antonym_synonym(g));
        thesaurus.add_synonym(groups.antonym_synonym(g), groups.antonym(g));
        thesaurus.add_antonym(groups.base(g), groups.antonym(g));
        thesaurus.add_antonym(groups.synonym(g), groups.antonym_synonym(g));
    }
    return thesaurus;
}

inline Corpus generate_natural(const NaturalSpec& spec, const Lexicon& lexicon) {
    spec.validate();
    lexicon.validate();
    detail::AdjectiveGroups groups = detail::adjective_groups(lexicon);

    Corpus corpus;
    corpus.name = "natural";
    corpus.seed = spec.seed;
    Rng rng(derive_seed(spec.seed, "natural"));
    std::unordered_set<std::string> used;

    auto noun = [&]() -> const std::string& {
        return lexicon.nouns[rng.bounded(lexicon.nouns.size())];
    };
    auto tail_noun = [&]() -> const std::string& {
        return lexicon.np_nouns[rng.bounded(lexicon.np_nouns.size())];
    };
    auto prep = [&]() -> const std::string& {
        return lexicon.np_preps[rng.bounded(lexicon.np_preps.size())];
    };
    auto determiner = [&]() { return rng.bounded(2) ? "the" : "a"; };

    const std::size_t per_label = spec.size / 3;
    const Label order[3] = {Label::Entailment, Label::Neutral, Label::Contradiction};
    for (Label label : order) {
        std::size_t made = 0;
        std::size_t attempts = 0;
        while (made < per_label) {
            if (++attempts > 200 * per_label + 10000)
                throw InsufficientLexicon("cannot generate enough distinct natural pairs");

            const std::size_t g = rng.bounded(groups.n_groups);
            const bool flip = rng.bounded(2) == 1;  // which side of the group is "true"
            const std::string& adj = flip ? groups.antonym(g) : groups.base(g);
            const std::string& adj_syn = flip ? groups.antonym_synonym(g) : groups.synonym(g);
            const std::string& adj_ant = flip ? groups.base(g) : groups.antonym(g);

            const std::string det = determiner();
            const std::string& subject = noun();
            const bool with_tail = rng.bounded(2) == 1;
            std::vector<std::string> premise = {det, subject, "is", adj};
            if (with_tail) {
                premise.push_back(prep());
                premise.push_back("the");
                premise.push_back(tail_noun());
            }

            std::vector<std::string> hypothesis;
            switch (label) {
                case Label::Entailment: {
                    const double roll = rng.uniform();
                    if (roll < spec.p_negation_given_entailment) {
                        // entailed via negated antonym: "X is A" => "X is not ant(A)"
                        hypothesis = {det, subject, "is", "not", adj_ant};
                    } else if (roll < 0.5) {
                        hypothesis = {det, subject, "is", adj};  // tail dropped
                    } else {
                        hypothesis = {det, subject, "is", adj_syn};
                    }
                    break;
                }
                case Label::Neutral: {
                    // adds unverifiable material: a fresh tail
                    hypothesis = {det, subject, "is", adj, prep(), "the", tail_noun()};
                    if (with_tail && hypothesis.size() == premise.size() &&
                        hypothesis[4] == premise[4] && hypothesis[6] == premise[6])
                        continue;  // accidentally reproduced the premise tail
                    break;
                }
                case Label::Contradiction: {
                    const double roll = rng.uniform();
                    if (roll < spec.p_negation_given_contradiction) {
                        hypothesis = {det, subject, "is", "not", adj};
                    } else if (roll < spec.p_negation_given_contradiction +
                                          spec.p_antonym_given_contradiction) {
                        hypothesis = {det, subject, "is", adj_ant};
                    } else {
                        // incompatible scene: different subject, different group
                        std::size_t g2 = rng.bounded(groups.n_groups);
                        const std::string& other_subject = noun();
                        if (other_subject == subject) continue;
                        hypothesis = {determiner(), other_subject, "is",
                                      rng.bounded(2) ? groups.base(g2) : groups.antonym(g2)};
                    }
                    break;
                }
            }

            SentencePair pair{Sentence(premise), Sentence(hypothesis), label, PairType::Natural};
            if (!used.insert(pair.text_key()).second) continue;
            corpus.pairs.push_back(std::move(pair));
            ++made;
        }
    }

    // Deterministic interleave so labels are mixed through the file.
    std::vector<std::size_t> order_idx(corpus.pairs.size());
    for (std::size_t i = 0; i < order_idx.size(); ++i) order_idx[i] = i;
    Rng shuffle_rng(derive_seed(spec.seed, "natural_shuffle"));
    shuffle_rng.shuffle(order_idx);
    Corpus shuffled;
    shuffled.name = corpus.name;
    shuffled.seed = corpus.seed;
    shuffled.pairs.reserve(corpus.pairs.size());
    for (std::size_t idx : order_idx) shuffled.pairs.push_back(std::move(corpus.pairs[idx]));
    return shuffled;
}

// Every word the generators can emit; synthetic embedding tables are built
// over this list.
inline std::vector<std::string> lexicon_vocabulary(const Lexicon& lexicon) {
    std::vector<std::string> words = {"the", "a", "is", "more", "less", "not", "than"};
    std::unordered_set<std::string> seen(words.begin(), words.end());
    for (const auto* list : {&lexicon.nouns, &lexicon.adjectives, &lexicon.np_adjectives,
                             &lexicon.np_nouns, &lexicon.np_preps})
        for (const auto& word : *list)
            if (seen.insert(word).second) words.push_back(word);
    return words;
}

}  // namespace sysprobe::compgen
