#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "sysprobe/corpus.hpp"
#include "sysprobe/embedding.hpp"
#include "sysprobe/errors.hpp"
#include "sysprobe/lexicon.hpp"
#include "sysprobe/rng.hpp"

namespace sysprobe::compgen {

// How X/Z noun-phrase slots are filled.
enum class NpMode { Simple, Long, MadeUp, NonNoun };

struct GenerationSpec {
    std::vector<PairType> sub_types = {PairType::Same, PairType::MoreLess, PairType::Not};
    std::size_t pairs_per_subtype = 0;
    std::uint64_t seed = 0;
    NpMode np_mode = NpMode::Simple;
    std::array<double, 3> split = {0.8, 0.1, 0.1};  // train, val, test

    void validate() const {
        if (sub_types.empty()) throw ConfigError("sub_types must be nonempty");
        std::unordered_set<int> seen;
        for (PairType t : sub_types) {
            if (t == PairType::Natural) throw ConfigError("natural is not a generated sub-type");
            if (!seen.insert(static_cast<int>(t)).second)
                throw ConfigError("duplicate sub_type");
        }
        if (pairs_per_subtype == 0 || pairs_per_subtype % 2 != 0)
            throw ConfigError("pairs_per_subtype must be positive and even");
        double sum = 0.0;
        for (double f : split) {
            if (f < 0.0 || f > 1.0) throw ConfigError("split fractions must be in [0,1]");
            sum += f;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
    }
};

namespace detail {

// Premise is always `X is more Y than Z`.
inline std::vector<std::string> premise_tokens(const std::vector<std::string>& x,
                                               const std::string& y,
                                               const std::vector<std::string>& z) {
    std::vector<std::string> out(x);
    out.insert(out.end(), {"is", "more", y, "than"});
    out.insert(out.end(), z.begin(), z.end());
    return out;
}

// Hypothesis templates, one per (sub-type, label).
inline std::vector<std::string> hypothesis_tokens(PairType sub_type, Label label,
                                                  const std::vector<std::string>& x,
                                                  const std::string& y,
                                                  const std::vector<std::string>& z) {
    const bool entail = label == Label::Entailment;
    std::vector<std::string> out;
    auto append = [&out](const std::vector<std::string>& np) {
        out.insert(out.end(), np.begin(), np.end());
    };
    switch (sub_type) {
        case PairType::Same:
            // entail: X is more Y than Z ; contradict: Z is more Y than X
            append(entail ? x : z);
            out.insert(out.end(), {"is", "more", y, "than"});
            append(entail ? z : x);
            return out;
        case PairType::MoreLess:
            // entail: Z is less Y than X ; contradict: X is less Y than Z
            append(entail ? z : x);
            out.insert(out.end(), {"is", "less", y, "than"});
            append(entail ? x : z);
            return out;
        case PairType::Not:
            // entail: Z is not more Y than X ; contradict: X is not more Y than Z
            append(entail ? z : x);
            out.insert(out.end(), {"is", "not", "more", y, "than"});
            append(entail ? x : z);
            return out;
        case PairType::Natural: break;
    }
    throw ConfigError("natural pairs are not templated");
}

using NpSampler = std::function<std::vector<std::string>(Rng&)>;

inline NpSampler simple_np_sampler(const std::vector<std::string>& pool) {
    if (pool.empty()) throw InsufficientLexicon("empty noun-phrase pool");
    return [&pool](Rng& rng) {
        return std::vector<std::string>{"the", pool[rng.bounded(pool.size())]};
    };
}

inline std::vector<std::string> sample_long_np(Rng& rng, const Lexicon& lexicon, int depth) {
    if (depth <= 0)
        return {"the", lexicon.np_nouns[rng.bounded(lexicon.np_nouns.size())]};
    // determiner adjective noun preposition determiner noun
    return {"the",
            lexicon.np_adjectives[rng.bounded(lexicon.np_adjectives.size())],
            lexicon.np_nouns[rng.bounded(lexicon.np_nouns.size())],
            lexicon.np_preps[rng.bounded(lexicon.np_preps.size())],
            "the",
            lexicon.np_nouns[rng.bounded(lexicon.np_nouns.size())]};
}

// Core generator: balanced entailment/contradiction twins per sampled
// (X, Y, Z) triple. Emitting both labels for every triple is what makes a
// permutation-invariant encoder's accuracy cap on same-type pairs exact.
inline Corpus generate_templated(const std::string& name,
                                 const std::vector<PairType>& sub_types,
                                 std::size_t pairs_per_subtype, std::uint64_t seed,
                                 const NpSampler& sample_np,
                                 const std::vector<std::string>& adjectives) {
    if (adjectives.empty()) throw InsufficientLexicon("no adjectives for the Y slot");
    Corpus corpus;
    corpus.name = name;
    corpus.seed = seed;
    std::unordered_set<std::string> used_pairs;

    for (PairType sub_type : sub_types) {
        Rng rng(derive_seed(seed, std::string("subtype_") + pair_type_name(sub_type)));
        const std::size_t duos = pairs_per_subtype / 2;
        std::size_t attempts = 0;
        const std::size_t max_attempts = 200 * duos + 10000;
        std::size_t made = 0;
        while (made < duos) {
            if (++attempts > max_attempts)
                throw InsufficientLexicon("could not sample " + std::to_string(duos) +
                                          " distinct comparison triples for sub-type " +
                                          pair_type_name(sub_type));
            std::vector<std::string> x = sample_np(rng);
            std::vector<std::string> z = sample_np(rng);
            if (x == z) continue;  // `X is more Y than X` has no gold label
            const std::string& y = adjectives[rng.bounded(adjectives.size())];

            Sentence premise{premise_tokens(x, y, z)};
            Sentence entail_hyp{hypothesis_tokens(sub_type, Label::Entailment, x, y, z)};
            Sentence contra_hyp{hypothesis_tokens(sub_type, Label::Contradiction, x, y, z)};

            std::string key_e = premise.text() + '\t' + entail_hyp.text();
            std::string key_c = premise.text() + '\t' + contra_hyp.text();
            if (used_pairs.count(key_e) || used_pairs.count(key_c)) continue;
            used_pairs.insert(key_e);
            used_pairs.insert(key_c);

            corpus.pairs.push_back({premise, entail_hyp, Label::Entailment, sub_type});
            corpus.pairs.push_back({premise, contra_hyp, Label::Contradiction, sub_type});
            ++made;
        }
    }
    return corpus;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Comparisons dataset
// ---------------------------------------------------------------------------

inline Corpus generate_comparisons(const GenerationSpec& spec, const Lexicon& lexicon) {
    spec.validate();
    lexicon.validate();

    detail::NpSampler sampler;
    switch (spec.np_mode) {
        case NpMode::Simple:
            sampler = detail::simple_np_sampler(lexicon.nouns);
            break;
        case NpMode::NonNoun:
            sampler = detail::simple_np_sampler(lexicon.adjectives);
            break;
        case NpMode::Long:
            sampler = [&lexicon](Rng& rng) { return detail::sample_long_np(rng, lexicon, 1); };
            break;
        case NpMode::MadeUp:
            throw ConfigError("made-up pairs are built by build_zero_shot_sets");
    }

    // Cheap feasibility bound for single-word X/Z pools.
    if (spec.np_mode == NpMode::Simple || spec.np_mode == NpMode::NonNoun) {
        const auto& pool = spec.np_mode == NpMode::Simple ? lexicon.nouns : lexicon.adjectives;
        const double capacity = static_cast<double>(pool.size()) * (pool.size() - 1) *
                                static_cast<double>(lexicon.adjectives.size());
        if (capacity < static_cast<double>(spec.pairs_per_subtype) / 2)
            throw InsufficientLexicon("lexicon supports only " + std::to_string(capacity) +
                                      " distinct triples");
    }

    return detail::generate_templated("comparisons", spec.sub_types, spec.pairs_per_subtype,
                                      spec.seed, sampler, lexicon.adjectives);
}

// Deterministic long noun phrase: `the <adj> <noun> <prep> the <noun>`;
// depth 0 degenerates to `the <noun>`.
inline std::vector<std::string> generate_long_np(std::uint64_t seed, const Lexicon& lexicon,
                                                 int depth = 1) {
    lexicon.validate();
    Rng rng(derive_seed(seed, "long_np"));
    return detail::sample_long_np(rng, lexicon, depth);
}

// ---------------------------------------------------------------------------
// Split handling
// ---------------------------------------------------------------------------

struct CorpusSplits {
    Corpus train, val, test;
};

namespace detail {

inline std::array<std::size_t, 3> split_counts(std::size_t n, const std::array<double, 3>& split) {
    std::size_t a = static_cast<std::size_t>(std::llround(n * split[0]));
    std::size_t b = static_cast<std::size_t>(std::llround(n * split[1]));
    if (a + b > n) b = n - std::min(a, n);
    return {a, b, n - a - b};
}

}  // namespace detail

// Split a generated Comparisons corpus. Entailment/contradiction twins that
// share a premise travel together, so every split keeps exact label balance
// per sub-type and same-type splits stay permutation-matched.
inline CorpusSplits split_comparisons(const Corpus& corpus, const std::array<double, 3>& split,
                                      std::uint64_t seed) {
    // Group pair indices by (sub_type, premise); groups keep first-seen order.
    std::vector<std::vector<std::size_t>> groups;
    std::map<std::string, std::size_t> group_of;
    std::vector<PairType> group_type;
    for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
        const auto& pair = corpus.pairs[i];
        std::string key = std::string(pair_type_name(pair.pair_type)) + '\0' + pair.premise.text();
        auto [it, inserted] = group_of.try_emplace(key, groups.size());
        if (inserted) {
            groups.emplace_back();
            group_type.push_back(pair.pair_type);
        }
        groups[it->second].push_back(i);
    }

    CorpusSplits out;
    out.train.name = corpus.name + "_train";
    out.val.name = corpus.name + "_val";
    out.test.name = corpus.name + "_test";
    out.train.seed = out.val.seed = out.test.seed = seed;

    // Allocate groups per sub-type so the ratios hold within each one.
    for (PairType sub_type : {PairType::Same, PairType::MoreLess, PairType::Not, PairType::Natural}) {
        std::vector<std::size_t> ids;
        for (std::size_t g = 0; g < groups.size(); ++g)
            if (group_type[g] == sub_type) ids.push_back(g);
        if (ids.empty()) continue;
        Rng rng(derive_seed(seed, std::string("split_") + pair_type_name(sub_type)));
        rng.shuffle(ids);
        const auto counts = detail::split_counts(ids.size(), split);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            Corpus& dest = k < counts[0] ? out.train : (k < counts[0] + counts[1] ? out.val : out.test);
            for (std::size_t idx : groups[ids[k]]) dest.pairs.push_back(corpus.pairs[idx]);
        }
    }
    return out;
}

// Label-stratified random split for natural corpora.
inline CorpusSplits split_stratified(const Corpus& corpus, const std::array<double, 3>& split,
                                     std::uint64_t seed) {
    CorpusSplits out;
    out.train.name = corpus.name + "_train";
    out.val.name = corpus.name + "_val";
    out.test.name = corpus.name + "_test";
    out.train.seed = out.val.seed = out.test.seed = seed;

    for (int lab = -1; lab < kNumLabels; ++lab) {
        std::vector<std::size_t> ids;
        for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
            const auto& label = corpus.pairs[i].label;
            if ((lab == -1 && !label) || (lab >= 0 && label && static_cast<int>(*label) == lab))
                ids.push_back(i);
        }
        if (ids.empty()) continue;
        Rng rng(derive_seed(seed, "split_label_" + std::to_string(lab)));
        rng.shuffle(ids);
        const auto counts = detail::split_counts(ids.size(), split);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            Corpus& dest = k < counts[0] ? out.train : (k < counts[0] + counts[1] ? out.val : out.test);
            dest.pairs.push_back(corpus.pairs[ids[k]]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Template introspection (used by audits and leakage checks)
// ---------------------------------------------------------------------------

struct ComparisonParts {
    std::vector<std::string> x;
    std::string y;
    std::vector<std::string> z;
};

// Recover (X, Y, Z) from a premise of the form `X is more Y than Z`.
inline std::optional<ComparisonParts> parse_comparison_premise(const Sentence& premise) {
    const auto& t = premise.tokens;
    for (std::size_t i = 1; i + 3 < t.size(); ++i) {
        if (t[i] == "is" && t[i + 1] == "more" && t[i + 3] == "than" && i + 4 < t.size()) {
            ComparisonParts parts;
            parts.x.assign(t.begin(), t.begin() + i);
            parts.y = t[i + 2];
            parts.z.assign(t.begin() + i + 4, t.end());
            return parts;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Zero-shot test sets
// ---------------------------------------------------------------------------

struct ZeroShotSets {
    Corpus held_out_nouns;
    Corpus made_up;
    Corpus long_np;
};

// Three test corpora whose X/Z fillers were never seen in training: nouns
// held out of the training vocabulary, pseudo-words backed by fresh Gaussian
// vectors (registered into `table`), and long noun phrases. Ys come from the
// training adjective pool.
inline ZeroShotSets build_zero_shot_sets(const Lexicon& lexicon,
                                         const std::unordered_set<std::string>& train_vocab,
                                         EmbeddingTable& table, std::size_t pairs_per_subtype,
                                         std::uint64_t seed) {
    lexicon.validate();
    if (pairs_per_subtype == 0 || pairs_per_subtype % 2 != 0)
        throw ConfigError("pairs_per_subtype must be positive and even");

    std::vector<std::string> held_out;
    for (const auto& noun : lexicon.nouns)
        if (!train_vocab.count(noun)) held_out.push_back(noun);
    if (held_out.size() < 2)
        throw InsufficientLexicon("fewer than 2 nouns outside the training vocabulary");

    const std::vector<PairType> all_types = {PairType::Same, PairType::MoreLess, PairType::Not};
    ZeroShotSets sets;

    sets.held_out_nouns =
        detail::generate_templated("zeroshot_held_out_nouns", all_types, pairs_per_subtype,
                                   derive_seed(seed, "held_out"),
                                   detail::simple_np_sampler(held_out), lexicon.adjectives);

    // Pseudo-words: guaranteed-fresh keys, Gaussian vectors in the table.
    std::vector<std::string> pseudo;
    const std::size_t pseudo_count = std::max<std::size_t>(held_out.size(), 16);
    for (std::size_t i = 0; i < pseudo_count; ++i) {
        std::string word = "@madeup_" + std::to_string(i);
        pseudo.push_back(word);
        if (!table.contains(word))
            table.add(word, random_embedding(table.dim, derive_seed(seed, word)));
    }
    sets.made_up = detail::generate_templated("zeroshot_made_up", all_types, pairs_per_subtype,
                                              derive_seed(seed, "made_up"),
                                              detail::simple_np_sampler(pseudo),
                                              lexicon.adjectives);

    sets.long_np = detail::generate_templated(
        "zeroshot_long_np", all_types, pairs_per_subtype, derive_seed(seed, "long_np"),
        [&lexicon](Rng& rng) { return detail::sample_long_np(rng, lexicon, 1); },
        lexicon.adjectives);
    return sets;
}

// Comparisons with adjectives (previously seen only in the Y slot) forced
// into the X/Z slots; labels still follow the standard rules.
inline Corpus build_type_violation_set(const Lexicon& lexicon, std::size_t pairs_per_subtype,
                                       std::uint64_t seed) {
    lexicon.validate();
    if (lexicon.adjectives.size() < 2)
        throw InsufficientLexicon("need at least 2 adjectives for X/Z slots");
    const std::vector<PairType> all_types = {PairType::Same, PairType::MoreLess, PairType::Not};
    return detail::generate_templated("type_violation", all_types, pairs_per_subtype,
                                      derive_seed(seed, "type_violation"),
                                      detail::simple_np_sampler(lexicon.adjectives),
                                      lexicon.adjectives);
}

// ---------------------------------------------------------------------------
// Biased exposure
// ---------------------------------------------------------------------------

enum class ExposureCondition { ZeroShotControl, ExposedC1, ExposedC2 };

inline const char* exposure_condition_name(ExposureCondition condition) {
    switch (condition) {
        case ExposureCondition::ZeroShotControl: return "zero_shot_control";
        case ExposureCondition::ExposedC1: return "exposed_c1";
        case ExposureCondition::ExposedC2: return "exposed_c2";
    }
    return "?";
}

// Contexts are fixed: C1 = more/less comparisons, C2 = same-type comparisons.
struct BiasedExposureSpec {
    std::size_t tokens_per_group = 0;   // long-NP tokens in each of T0, T*
    std::size_t cell_train_size = 0;    // pairs per cell; multiple of 4
    std::size_t cell_test_size = 0;     // pairs per cell; even
    ExposureCondition condition = ExposureCondition::ZeroShotControl;

    void validate() const {
        if (tokens_per_group < 2) throw ConfigError("tokens_per_group must be >= 2");
        if (cell_train_size == 0 || cell_train_size % 4 != 0)
            throw ConfigError("cell_train_size must be a positive multiple of 4");
        if (cell_test_size == 0 || cell_test_size % 2 != 0)
            throw ConfigError("cell_test_size must be positive and even");
    }
};

// Cell order: C1T0, C1T*, C2T0, C2T*.
enum Cell : std::size_t { kC1T0 = 0, kC1Tstar = 1, kC2T0 = 2, kC2Tstar = 3 };

inline const char* cell_name(std::size_t cell) {
    static const char* names[4] = {"c1_t0", "c1_tstar", "c2_t0", "c2_tstar"};
    return names[cell];
}

struct BiasedExposureData {
    Corpus train;                  // per spec.condition
    std::array<Corpus, 4> tests;   // indexed by Cell
};

// Everything except the condition's train selection depends only on
// (spec sizes, lexicon, seed), so the four cells coincide exactly across
// the three conditions when built from one shared seed.
inline BiasedExposureData build_biased_exposure(const BiasedExposureSpec& spec,
                                                const Lexicon& lexicon, std::uint64_t seed) {
    spec.validate();
    lexicon.validate();

    // Distinct long-NP tokens, randomly divided into T0 and T*.
    Rng token_rng(derive_seed(seed, "tokens"));
    std::vector<std::vector<std::string>> phrases;
    std::unordered_set<std::string> phrase_keys;
    std::size_t attempts = 0;
    const std::size_t want = 2 * spec.tokens_per_group;
    while (phrases.size() < want) {
        if (++attempts > 200 * want + 10000)
            throw InsufficientLexicon("cannot compose " + std::to_string(want) +
                                      " distinct long noun phrases");
        auto np = detail::sample_long_np(token_rng, lexicon, 1);
        std::string key;
        for (const auto& w : np) key += w + ' ';
        if (phrase_keys.insert(key).second) phrases.push_back(std::move(np));
    }
    std::vector<std::vector<std::string>> group_t0(phrases.begin(),
                                                   phrases.begin() + spec.tokens_per_group);
    std::vector<std::vector<std::string>> group_tstar(phrases.begin() + spec.tokens_per_group,
                                                      phrases.end());

    // Build each cell, split duo-aware into train/test.
    const PairType cell_context[4] = {PairType::MoreLess, PairType::MoreLess, PairType::Same,
                                      PairType::Same};
    const bool cell_uses_t0[4] = {true, false, true, false};
    std::array<Corpus, 4> cell_train;
    BiasedExposureData data;
    const std::size_t cell_pairs = spec.cell_train_size + spec.cell_test_size;
    const double total = static_cast<double>(cell_pairs);
    const std::array<double, 3> cell_split = {spec.cell_train_size / total, 0.0,
                                              spec.cell_test_size / total};
    for (std::size_t cell = 0; cell < 4; ++cell) {
        const auto& group = cell_uses_t0[cell] ? group_t0 : group_tstar;
        auto sampler = [&group](Rng& rng) { return group[rng.bounded(group.size())]; };
        Corpus full = detail::generate_templated(
            std::string("biased_") + cell_name(cell), {cell_context[cell]}, cell_pairs,
            derive_seed(seed, std::string("cell_") + cell_name(cell)), sampler,
            lexicon.adjectives);
        CorpusSplits splits = split_comparisons(
            full, cell_split, derive_seed(seed, std::string("cellsplit_") + cell_name(cell)));
        cell_train[cell] = std::move(splits.train);
        data.tests[cell] = std::move(splits.test);
        data.tests[cell].name = std::string("test_") + cell_name(cell);
    }

    // Random duo-aware half of a cell's training pairs; the selection RNG
    // depends only on (seed, cell), never on the condition.
    auto half_of = [&](std::size_t cell) {
        const Corpus& src = cell_train[cell];
        std::vector<std::size_t> duos(src.pairs.size() / 2);
        for (std::size_t i = 0; i < duos.size(); ++i) duos[i] = i;
        Rng rng(derive_seed(seed, std::string("half_") + cell_name(cell)));
        rng.shuffle(duos);
        duos.resize(duos.size() / 2);
        std::sort(duos.begin(), duos.end());
        Corpus out;
        out.name = src.name + "_half";
        for (std::size_t duo : duos) {
            out.pairs.push_back(src.pairs[2 * duo]);
            out.pairs.push_back(src.pairs[2 * duo + 1]);
        }
        return out;
    };

    auto append = [](Corpus& dest, const Corpus& src) {
        dest.pairs.insert(dest.pairs.end(), src.pairs.begin(), src.pairs.end());
    };

    data.train.name = std::string("train_") + exposure_condition_name(spec.condition);
    data.train.seed = seed;
    switch (spec.condition) {
        case ExposureCondition::ZeroShotControl:
            append(data.train, cell_train[kC1T0]);
            append(data.train, cell_train[kC2T0]);
            break;
        case ExposureCondition::ExposedC1:
            append(data.train, half_of(kC1T0));
            append(data.train, half_of(kC1Tstar));
            append(data.train, cell_train[kC2T0]);
            break;
        case ExposureCondition::ExposedC2:
            append(data.train, cell_train[kC1T0]);
            append(data.train, half_of(kC2T0));
            append(data.train, half_of(kC2Tstar));
            break;
    }
    return data;
}

}  // namespace sysprobe::compgen
