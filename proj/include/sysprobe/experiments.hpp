#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "sysprobe/compgen.hpp"
#include "sysprobe/corpus.hpp"
#include "sysprobe/errors.hpp"
#include "sysprobe/model.hpp"
#include "sysprobe/natural.hpp"
#include "sysprobe/trainer.hpp"

namespace sysprobe::experiments {

using model::ModelConfig;
using model::ModelParams;

// ---------------------------------------------------------------------------
// Confusion matrices
// ---------------------------------------------------------------------------

// Raw counts; rows = gold label, columns = predicted label. Normalization is
// a view so every reported number stays recomputable.
struct ConfusionMatrix {
    std::array<std::array<std::int64_t, 3>, 3> counts{};

    void add(Label gold, Label predicted) {
        counts[static_cast<int>(gold)][static_cast<int>(predicted)]++;
    }

    std::int64_t total() const {
        std::int64_t n = 0;
        for (const auto& row : counts)
            for (std::int64_t c : row) n += c;
        return n;
    }

    std::int64_t trace() const { return counts[0][0] + counts[1][1] + counts[2][2]; }

    double accuracy() const {
        const std::int64_t n = total();
        if (n == 0) throw EmptyCorpus("confusion matrix has no counts");
        return static_cast<double>(trace()) / static_cast<double>(n);
    }

    // Row-normalized view; rows with zero total are absent.
    std::array<std::optional<std::array<double, 3>>, 3> normalized() const {
        std::array<std::optional<std::array<double, 3>>, 3> rows;
        for (int gold = 0; gold < kNumLabels; ++gold) {
            std::int64_t row_total = 0;
            for (std::int64_t c : counts[gold]) row_total += c;
            if (row_total == 0) continue;
            std::array<double, 3> row{};
            for (int pred = 0; pred < kNumLabels; ++pred)
                row[pred] = static_cast<double>(counts[gold][pred]) /
                            static_cast<double>(row_total);
            rows[gold] = row;
        }
        return rows;
    }
};

inline void to_json(nlohmann::json& j, const ConfusionMatrix& matrix) {
    j["counts"] = matrix.counts;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : matrix.normalized()) {
        if (row) rows.push_back(*row);
        else rows.push_back(nullptr);
    }
    j["normalized_rows"] = std::move(rows);
    j["labels"] = {label_name(Label::Entailment), label_name(Label::Neutral),
                   label_name(Label::Contradiction)};
}

inline void from_json(const nlohmann::json& j, ConfusionMatrix& matrix) {
    matrix.counts = j.at("counts").get<std::array<std::array<std::int64_t, 3>, 3>>();
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalOutcome {
    double accuracy_percent = 0.0;
    ConfusionMatrix confusion;
    std::size_t oov = 0;  // zero-vector token encodings seen while evaluating
};

inline void to_json(nlohmann::json& j, const EvalOutcome& outcome) {
    j = {{"accuracy_percent", outcome.accuracy_percent},
         {"confusion", outcome.confusion},
         {"oov_encodings", outcome.oov}};
}

inline void from_json(const nlohmann::json& j, EvalOutcome& outcome) {
    outcome.accuracy_percent = j.at("accuracy_percent").get<double>();
    outcome.confusion = j.at("confusion").get<ConfusionMatrix>();
    outcome.oov = j.value("oov_encodings", std::size_t{0});
}

inline EvalOutcome evaluate(const ModelParams& params, const Corpus& corpus,
                            const EmbeddingTable& table) {
    if (corpus.empty()) throw EmptyCorpus("evaluate: empty corpus \"" + corpus.name + "\"");
    EvalOutcome outcome;
    for (const auto& pair : corpus.pairs) {
        if (!pair.label) throw MissingLabel("evaluate requires gold labels");
        const Label predicted = model::predict_pair(pair, params, table, &outcome.oov);
        outcome.confusion.add(*pair.label, predicted);
    }
    outcome.accuracy_percent = 100.0 * outcome.confusion.accuracy();
    return outcome;
}

// ---------------------------------------------------------------------------
// Experiment results
// ---------------------------------------------------------------------------

struct ExperimentResult {
    std::string experiment_name;
    std::vector<std::pair<std::string, EvalOutcome>> evals;  // ordered (test set, outcome)
    std::map<std::string, double> metrics;                   // derived scalars (gaps, deltas)
    std::vector<model::EpochLog> training_log;
    nlohmann::json config_snapshot;  // configs and seeds for exact reruns

    const EvalOutcome* find(const std::string& name) const {
        for (const auto& [key, outcome] : evals)
            if (key == name) return &outcome;
        return nullptr;
    }

    const EvalOutcome& at(const std::string& name) const {
        if (const EvalOutcome* outcome = find(name)) return *outcome;
        throw KeyError("experiment \"" + experiment_name + "\" has no test set \"" + name + "\"");
    }

    void add_eval(const std::string& name, EvalOutcome outcome) {
        evals.emplace_back(name, std::move(outcome));
    }
};

inline void to_json(nlohmann::json& j, const ExperimentResult& result) {
    j["experiment"] = result.experiment_name;
    nlohmann::json evals = nlohmann::json::array();
    for (const auto& [name, outcome] : result.evals)
        evals.push_back({{"test_set", name}, {"outcome", outcome}});
    j["evals"] = std::move(evals);
    j["metrics"] = result.metrics;
    j["training_log"] = result.training_log;
    j["config"] = result.config_snapshot;
}

struct ContextTyingScore {
    std::string test_cell;
    double exposed_accuracy = 0.0;
    double zero_shot_accuracy = 0.0;
    double gap = 0.0;  // zero-shot control minus exposed, on the unexposed cell
};

inline void to_json(nlohmann::json& j, const ContextTyingScore& score) {
    j = {{"test_cell", score.test_cell},
         {"exposed_accuracy", score.exposed_accuracy},
         {"zero_shot_accuracy", score.zero_shot_accuracy},
         {"gap", score.gap}};
}

// Accuracy gap on a cell the exposed model never saw in its own context.
inline ContextTyingScore context_tying(const ExperimentResult& exposed,
                                       const ExperimentResult& control,
                                       const std::string& cell) {
    ContextTyingScore score;
    score.test_cell = cell;
    score.exposed_accuracy = exposed.at(cell).accuracy_percent;
    score.zero_shot_accuracy = control.at(cell).accuracy_percent;
    score.gap = score.zero_shot_accuracy - score.exposed_accuracy;
    return score;
}

// ---------------------------------------------------------------------------
// Vocabulary helpers
// ---------------------------------------------------------------------------

inline std::unordered_set<std::string> corpus_vocabulary(const Corpus& corpus) {
    std::unordered_set<std::string> vocab;
    for (const auto& pair : corpus.pairs)
        for (const Sentence* sentence : {&pair.premise, &pair.hypothesis})
            for (const auto& token : sentence->tokens) vocab.insert(token);
    return vocab;
}

// X/Z filler tokens (minus determiners) must be absent from the training
// vocabulary for the held-out and made-up zero-shot sets.
inline void check_no_leakage(const Corpus& corpus,
                             const std::unordered_set<std::string>& train_vocab) {
    for (const auto& pair : corpus.pairs) {
        const auto parts = compgen::parse_comparison_premise(pair.premise);
        if (!parts) throw ParseError("non-template pair in zero-shot corpus: " +
                                     pair.premise.text());
        for (const auto* span : {&parts->x, &parts->z})
            for (const auto& token : *span) {
                if (token == "the" || token == "a") continue;
                if (train_vocab.count(token))
                    throw LeakageError("zero-shot filler \"" + token +
                                       "\" appears in the training vocabulary (corpus \"" +
                                       corpus.name + "\")");
            }
    }
}

// ---------------------------------------------------------------------------
// Protocol runners
// ---------------------------------------------------------------------------

// Fine-tune a natural-corpus model on comparisons data; report pre/post
// accuracy on comparisons train/test and the natural test set.
inline ExperimentResult run_finetune(const ModelParams& base_params,
                                     const compgen::CorpusSplits& comparisons,
                                     const Corpus& natural_test,
                                     const model::TrainConfig& train_config,
                                     const EmbeddingTable& table) {
    ExperimentResult result;
    result.experiment_name = "finetune";
    result.add_eval("pre/comparisons_train", evaluate(base_params, comparisons.train, table));
    result.add_eval("pre/comparisons_test", evaluate(base_params, comparisons.test, table));
    result.add_eval("pre/natural_test", evaluate(base_params, natural_test, table));

    model::TrainResult tuned = model::train(comparisons.train, comparisons.val, base_params,
                                            train_config, table, model::TrainMode::FineTune);
    result.training_log = tuned.log;
    result.add_eval("post/comparisons_train", evaluate(tuned.params, comparisons.train, table));
    result.add_eval("post/comparisons_test", evaluate(tuned.params, comparisons.test, table));
    result.add_eval("post/natural_test", evaluate(tuned.params, natural_test, table));

    result.metrics["comparisons_test_gain"] =
        result.at("post/comparisons_test").accuracy_percent -
        result.at("pre/comparisons_test").accuracy_percent;
    result.metrics["natural_test_drop"] = result.at("pre/natural_test").accuracy_percent -
                                          result.at("post/natural_test").accuracy_percent;
    return result;
}

struct RetrainOutcome {
    ExperimentResult result;
    ModelParams params;  // the jointly trained model
};

// Train from scratch on the union of the natural and comparisons training
// sets (interleaved by the shuffled SGD order), then report both test sets.
inline RetrainOutcome run_retrain(const compgen::CorpusSplits& natural,
                                  const compgen::CorpusSplits& comparisons,
                                  const ModelConfig& model_config,
                                  const model::TrainConfig& train_config,
                                  const EmbeddingTable& table) {
    Corpus joint_train;
    joint_train.name = "joint_train";
    joint_train.pairs = natural.train.pairs;
    joint_train.pairs.insert(joint_train.pairs.end(), comparisons.train.pairs.begin(),
                             comparisons.train.pairs.end());
    if (joint_train.size() != natural.train.size() + comparisons.train.size())
        throw RangeError("interleaving changed the example count");
    Corpus joint_val;
    joint_val.name = "joint_val";
    joint_val.pairs = natural.val.pairs;
    joint_val.pairs.insert(joint_val.pairs.end(), comparisons.val.pairs.begin(),
                           comparisons.val.pairs.end());

    RetrainOutcome outcome;
    model::TrainResult trained =
        model::train(joint_train, joint_val, model::zero_params(model_config), train_config,
                     table, model::TrainMode::Fresh);
    outcome.params = trained.params;
    outcome.result.experiment_name = "retrain";
    outcome.result.training_log = trained.log;
    outcome.result.add_eval("joint_train", evaluate(outcome.params, joint_train, table));
    outcome.result.add_eval("comparisons_test", evaluate(outcome.params, comparisons.test, table));
    outcome.result.add_eval("natural_test", evaluate(outcome.params, natural.test, table));
    return outcome;
}

// Evaluate augmented vs unaugmented models on the three unseen-token test
// sets. Token-level leakage is rejected for the held-out-noun and made-up
// sets; the long-NP set is new as phrases, not as words.
inline ExperimentResult run_zero_shot(const ModelParams& augmented_params,
                                      const ModelParams& baseline_params,
                                      const compgen::ZeroShotSets& sets,
                                      const std::unordered_set<std::string>& train_vocab,
                                      const EmbeddingTable& table) {
    check_no_leakage(sets.held_out_nouns, train_vocab);
    check_no_leakage(sets.made_up, train_vocab);

    ExperimentResult result;
    result.experiment_name = "zeroshot";
    result.add_eval("augmented/held_out_nouns", evaluate(augmented_params, sets.held_out_nouns, table));
    result.add_eval("augmented/made_up", evaluate(augmented_params, sets.made_up, table));
    result.add_eval("augmented/long_np", evaluate(augmented_params, sets.long_np, table));
    result.add_eval("baseline/held_out_nouns", evaluate(baseline_params, sets.held_out_nouns, table));
    result.add_eval("baseline/made_up", evaluate(baseline_params, sets.made_up, table));
    result.add_eval("baseline/long_np", evaluate(baseline_params, sets.long_np, table));
    for (const char* name : {"held_out_nouns", "made_up", "long_np"})
        result.metrics[std::string("advantage/") + name] =
            result.at(std::string("augmented/") + name).accuracy_percent -
            result.at(std::string("baseline/") + name).accuracy_percent;
    return result;
}

// Accuracy on syntactically ill-typed fillers next to the held-out-noun
// control; the gap is reported regardless of sign.
inline ExperimentResult run_type_violation(const ModelParams& params, const Corpus& violation,
                                           const Corpus& noun_control,
                                           const EmbeddingTable& table) {
    ExperimentResult result;
    result.experiment_name = "typeviolation";
    result.add_eval("non_noun_words", evaluate(params, violation, table));
    result.add_eval("held_out_nouns", evaluate(params, noun_control, table));
    result.metrics["context_category_gap"] = result.at("held_out_nouns").accuracy_percent -
                                             result.at("non_noun_words").accuracy_percent;
    return result;
}

struct BiasedExposureOutcome {
    std::array<ExperimentResult, 3> results;  // control, exposed_c1, exposed_c2
    std::vector<ContextTyingScore> tying;
};

// Three conditions built from one shared seed (identical cells), trained
// identically, evaluated on the shared test cells.
inline BiasedExposureOutcome run_biased_exposure(compgen::BiasedExposureSpec spec,
                                                 const Lexicon& lexicon, std::uint64_t data_seed,
                                                 const ModelParams& base_params,
                                                 const model::TrainConfig& train_config,
                                                 model::TrainMode mode,
                                                 const EmbeddingTable& table) {
    using compgen::ExposureCondition;
    const ExposureCondition conditions[3] = {ExposureCondition::ZeroShotControl,
                                             ExposureCondition::ExposedC1,
                                             ExposureCondition::ExposedC2};

    std::array<compgen::BiasedExposureData, 3> data;
    for (int c = 0; c < 3; ++c) {
        spec.condition = conditions[c];
        data[c] = compgen::build_biased_exposure(spec, lexicon, data_seed);
    }

    // All conditions must see the same number of examples, context-balanced.
    for (int c = 0; c < 3; ++c) {
        if (data[c].train.size() != data[0].train.size())
            throw RangeError("biased-exposure training sets differ in size");
        std::size_t c1 = 0, c2 = 0;
        for (const auto& pair : data[c].train.pairs)
            (pair.pair_type == PairType::MoreLess ? c1 : c2)++;
        if (c1 != c2) throw RangeError("biased-exposure training set is context-unbalanced");
    }

    BiasedExposureOutcome outcome;
    for (int c = 0; c < 3; ++c) {
        Corpus t0_union;  // first test row: previously unseen T0 combinations
        t0_union.name = "test_c1t0_plus_c2t0";
        t0_union.pairs = data[c].tests[compgen::kC1T0].pairs;
        t0_union.pairs.insert(t0_union.pairs.end(), data[c].tests[compgen::kC2T0].pairs.begin(),
                              data[c].tests[compgen::kC2T0].pairs.end());

        // Validation on held-out T0 cells only; T* cells stay test-only.
        model::TrainResult trained = model::train(data[c].train, t0_union, base_params,
                                                  train_config, table, mode);

        ExperimentResult& result = outcome.results[c];
        result.experiment_name =
            std::string("biasedexposure/") + compgen::exposure_condition_name(conditions[c]);
        result.training_log = trained.log;
        result.add_eval("c1t0_plus_c2t0", evaluate(trained.params, t0_union, table));
        result.add_eval("c1_tstar",
                        evaluate(trained.params, data[c].tests[compgen::kC1Tstar], table));
        result.add_eval("c2_tstar",
                        evaluate(trained.params, data[c].tests[compgen::kC2Tstar], table));
    }

    // Each exposed condition vs the control, on its unexposed cell.
    ContextTyingScore c1_score = context_tying(outcome.results[1], outcome.results[0], "c2_tstar");
    ContextTyingScore c2_score = context_tying(outcome.results[2], outcome.results[0], "c1_tstar");
    c1_score.test_cell = "exposed_c1/unexposed_cell_c2_tstar";
    c2_score.test_cell = "exposed_c2/unexposed_cell_c1_tstar";
    outcome.tying = {c1_score, c2_score};
    outcome.results[1].metrics["context_tying_gap"] = c1_score.gap;
    outcome.results[2].metrics["context_tying_gap"] = c2_score.gap;
    return outcome;
}

}  // namespace sysprobe::experiments
