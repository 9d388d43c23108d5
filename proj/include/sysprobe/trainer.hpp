#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sysprobe/corpus.hpp"
#include "sysprobe/errors.hpp"
#include "sysprobe/model.hpp"
#include "sysprobe/rng.hpp"

namespace sysprobe::model {

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 0.1;
    double lr_shrink = 5.0;        // divide lr by this when val accuracy drops
    double lr_floor = 1e-5;        // stop once lr falls below this
    std::size_t batch_size = 64;
    std::size_t max_epochs = 20;
    std::uint64_t seed = 0;

    void validate() const {
        if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
        if (lr_shrink <= 1.0) throw ConfigError("lr_shrink must be > 1");
        if (lr_floor <= 0.0) throw ConfigError("lr_floor must be positive");
        if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& config) {
    j = {{"learning_rate", config.learning_rate}, {"lr_shrink", config.lr_shrink},
         {"lr_floor", config.lr_floor},           {"batch_size", config.batch_size},
         {"max_epochs", config.max_epochs},       {"seed", config.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& config) {
    if (j.contains("learning_rate")) config.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("lr_shrink")) config.lr_shrink = j.at("lr_shrink").get<double>();
    if (j.contains("lr_floor")) config.lr_floor = j.at("lr_floor").get<double>();
    if (j.contains("batch_size")) config.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("max_epochs")) config.max_epochs = j.at("max_epochs").get<std::size_t>();
    if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
    config.validate();
}

enum class TrainMode { Fresh, FineTune };

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double train_accuracy = 0.0;  // percent
    double val_accuracy = 0.0;    // percent
    double learning_rate = 0.0;
};

inline void to_json(nlohmann::json& j, const EpochLog& log) {
    j = {{"epoch", log.epoch},
         {"mean_loss", log.mean_loss},
         {"train_accuracy", log.train_accuracy},
         {"val_accuracy", log.val_accuracy},
         {"learning_rate", log.learning_rate}};
}

struct TrainResult {
    ModelParams params;
    std::vector<EpochLog> log;
    std::size_t oov_encodings = 0;  // zero-vector substitutions while caching
};

inline double accuracy_percent(const std::vector<EncodedPair>& examples,
                               const ModelParams& params) {
    if (examples.empty()) throw EmptyCorpus("accuracy over an empty set");
    std::size_t correct = 0;
    for (const auto& example : examples) {
        Eigen::VectorXd u, v;
        if (params.config.kind == EncoderKind::Recurrent) {
            detail::SentenceCache pc, hc;
            detail::encode_recurrent(params, example.premise, pc);
            detail::encode_recurrent(params, example.hypothesis, hc);
            u = pc.output;
            v = hc.output;
        } else {
            u = example.premise_bow;
            v = example.hypothesis_bow;
        }
        if (static_cast<int>(predict_from_probs(classify_pair(u, v, params))) == example.label)
            ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(examples.size());
}

// Plain SGD over shuffled batches. After each epoch the validation accuracy
// is compared with the previous epoch's; on a drop the learning rate is
// divided by lr_shrink, and training stops once it falls below lr_floor.
inline TrainResult train(const Corpus& train_corpus, const Corpus& val_corpus,
                         const ModelParams& params0, const TrainConfig& config,
                         const EmbeddingTable& table, TrainMode mode) {
    config.validate();
    if (train_corpus.empty()) throw EmptyCorpus("empty training corpus");
    if (val_corpus.empty()) throw EmptyCorpus("empty validation corpus");

    TrainResult result;
    result.params = mode == TrainMode::Fresh ? init_params(params0.config, config.seed) : params0;
    if (config.max_epochs == 0) return result;

    std::vector<EncodedPair> train_set =
        encode_corpus(train_corpus, result.params.config, table, &result.oov_encodings);
    std::vector<EncodedPair> val_set =
        encode_corpus(val_corpus, result.params.config, table, &result.oov_encodings);

    double lr = config.learning_rate;
    double prev_val = -1.0;
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, 0x1000 + epoch));
        rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        std::vector<EncodedPair> batch;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(start + config.batch_size, order.size());
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);

            LossAndGradients step = loss_and_gradients(batch, result.params);
            if (!std::isfinite(step.loss))
                throw NumericalError("non-finite training loss", epoch, batches);
            loss_sum += step.loss;
            ++batches;

            auto grads = step.gradients.array_refs();
            auto weights = result.params.array_refs();
            for (std::size_t a = 0; a < weights.size(); ++a)
                Eigen::Map<Eigen::VectorXd>(weights[a].data, weights[a].size()) -=
                    lr * Eigen::Map<const Eigen::VectorXd>(grads[a].data, grads[a].size());
        }
        if (!result.params.all_finite())
            throw NumericalError("non-finite parameters after update", epoch, batches);

        EpochLog log;
        log.epoch = epoch;
        log.mean_loss = loss_sum / static_cast<double>(batches);
        log.train_accuracy = accuracy_percent(train_set, result.params);
        log.val_accuracy = accuracy_percent(val_set, result.params);
        log.learning_rate = lr;
        result.log.push_back(log);

        if (prev_val >= 0.0 && log.val_accuracy < prev_val) lr /= config.lr_shrink;
        prev_val = log.val_accuracy;
        if (lr < config.lr_floor) break;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned JSON with config, seed, and named arrays. Array
// values round-trip exactly (shortest-repr doubles).
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "sysprobe-checkpoint";

inline nlohmann::json checkpoint_to_json(ModelParams& params) {
    nlohmann::json arrays = nlohmann::json::object();
    for (const auto& ref : params.array_refs()) {
        nlohmann::json entry;
        entry["rows"] = ref.rows;
        entry["cols"] = ref.cols;
        entry["data"] = std::vector<double>(ref.data, ref.data + ref.size());
        arrays[ref.name] = std::move(entry);
    }
    return nlohmann::json{{"format", kCheckpointFormat},
                          {"version", kCheckpointVersion},
                          {"config", params.config},
                          {"init_seed", params.init_seed},
                          {"arrays", std::move(arrays)}};
}

inline void save_checkpoint(ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out << checkpoint_to_json(params).dump(2) << '\n';
    out.flush();
    if (!out) throw IoError("checkpoint write failed: " + path);
}

inline ModelParams checkpoint_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", "") != kCheckpointFormat)
        throw CheckpointError("not a sysprobe checkpoint");
    if (j.value("version", -1) != kCheckpointVersion)
        throw VersionError("unsupported checkpoint version " +
                           std::to_string(j.value("version", -1)));
    ModelParams params;
    try {
        params = zero_params(j.at("config").get<ModelConfig>());
        params.init_seed = j.at("init_seed").get<std::uint64_t>();
        const auto& arrays = j.at("arrays");
        for (auto& ref : params.array_refs()) {
            const auto& entry = arrays.at(ref.name);
            if (entry.at("rows").get<Eigen::Index>() != ref.rows ||
                entry.at("cols").get<Eigen::Index>() != ref.cols)
                throw CheckpointError("array \"" + ref.name + "\" has unexpected shape");
            const auto data = entry.at("data").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(data.size()) != ref.size())
                throw CheckpointError("array \"" + ref.name + "\" has unexpected length");
            std::copy(data.begin(), data.end(), ref.data);
        }
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
    }
    if (!params.all_finite()) throw CheckpointError("checkpoint contains non-finite values");
    return params;
}

inline ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw CheckpointError("checkpoint is not valid JSON: " + path);
    return checkpoint_from_json(j);
}

}  // namespace sysprobe::model
