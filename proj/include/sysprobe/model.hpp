#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sysprobe/corpus.hpp"
#include "sysprobe/embedding.hpp"
#include "sysprobe/errors.hpp"
#include "sysprobe/rng.hpp"

namespace sysprobe::model {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class EncoderKind { Bow, Recurrent };
enum class CellKind { Gated, Simple };

struct ModelConfig {
    EncoderKind kind = EncoderKind::Recurrent;
    int input_dim = 50;             // word-vector dimension
    int hidden_dim = 64;            // per direction, recurrent only
    CellKind cell = CellKind::Gated;
    int classifier_hidden_dim = 128;

    int encoder_output_dim() const {
        return kind == EncoderKind::Bow ? input_dim : 2 * hidden_dim;
    }

    void validate() const {
        if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
        if (kind == EncoderKind::Recurrent && hidden_dim < 1)
            throw ConfigError("hidden_dim must be >= 1");
        if (classifier_hidden_dim < 1) throw ConfigError("classifier_hidden_dim must be >= 1");
    }
};

inline const char* encoder_kind_name(EncoderKind kind) {
    return kind == EncoderKind::Bow ? "bow" : "recurrent";
}

inline const char* cell_kind_name(CellKind kind) {
    return kind == CellKind::Gated ? "gated" : "simple";
}

inline void to_json(nlohmann::json& j, const ModelConfig& config) {
    j = {{"kind", encoder_kind_name(config.kind)},
         {"input_dim", config.input_dim},
         {"hidden_dim", config.hidden_dim},
         {"cell", cell_kind_name(config.cell)},
         {"classifier_hidden_dim", config.classifier_hidden_dim},
         {"pooling", "max"}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& config) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "bow") config.kind = EncoderKind::Bow;
    else if (kind == "recurrent") config.kind = EncoderKind::Recurrent;
    else throw ConfigError("unknown encoder kind \"" + kind + "\"");
    config.input_dim = j.at("input_dim").get<int>();
    config.hidden_dim = j.at("hidden_dim").get<int>();
    if (j.contains("cell")) {
        const std::string cell = j.at("cell").get<std::string>();
        if (cell == "gated") config.cell = CellKind::Gated;
        else if (cell == "simple") config.cell = CellKind::Simple;
        else throw ConfigError("unknown cell kind \"" + cell + "\"");
    }
    if (j.contains("classifier_hidden_dim"))
        config.classifier_hidden_dim = j.at("classifier_hidden_dim").get<int>();
    config.validate();
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

// One recurrent direction. Gate arrays are 0x0 for simple cells.
struct RecurrentCellParams {
    Eigen::MatrixXd w_in, u_rec;              // candidate/state path
    Eigen::VectorXd b;
    Eigen::MatrixXd w_reset_in, u_reset_rec;  // gated only
    Eigen::VectorXd b_reset;
    Eigen::MatrixXd w_update_in, u_update_rec;
    Eigen::VectorXd b_update;
};

struct ClassifierParams {
    Eigen::MatrixXd w_hidden;  // classifier_hidden x 4m
    Eigen::VectorXd b_hidden;
    Eigen::MatrixXd w_out;     // 3 x classifier_hidden
    Eigen::VectorXd b_out;
};

struct ArrayRef {
    std::string name;
    double* data;
    Eigen::Index rows, cols;

    Eigen::Index size() const { return rows * cols; }
};

struct ModelParams {
    ModelConfig config;
    RecurrentCellParams forward_cell, backward_cell;
    ClassifierParams classifier;
    std::uint64_t init_seed = 0;

    // Canonical array enumeration; drives initialization, SGD updates,
    // checkpoints, and gradient checks. Zero-sized arrays are skipped.
    std::vector<ArrayRef> array_refs() {
        std::vector<ArrayRef> refs;
        auto add_mat = [&refs](const std::string& name, Eigen::MatrixXd& m) {
            if (m.size() > 0) refs.push_back({name, m.data(), m.rows(), m.cols()});
        };
        auto add_vec = [&refs](const std::string& name, Eigen::VectorXd& v) {
            if (v.size() > 0) refs.push_back({name, v.data(), v.size(), 1});
        };
        auto add_cell = [&](const std::string& prefix, RecurrentCellParams& cell) {
            add_mat(prefix + ".w_in", cell.w_in);
            add_mat(prefix + ".u_rec", cell.u_rec);
            add_vec(prefix + ".b", cell.b);
            add_mat(prefix + ".w_reset_in", cell.w_reset_in);
            add_mat(prefix + ".u_reset_rec", cell.u_reset_rec);
            add_vec(prefix + ".b_reset", cell.b_reset);
            add_mat(prefix + ".w_update_in", cell.w_update_in);
            add_mat(prefix + ".u_update_rec", cell.u_update_rec);
            add_vec(prefix + ".b_update", cell.b_update);
        };
        add_cell("fwd", forward_cell);
        add_cell("bwd", backward_cell);
        add_mat("cls.w_hidden", classifier.w_hidden);
        add_vec("cls.b_hidden", classifier.b_hidden);
        add_mat("cls.w_out", classifier.w_out);
        add_vec("cls.b_out", classifier.b_out);
        return refs;
    }

    bool all_finite() {
        for (const auto& ref : array_refs())
            for (Eigen::Index i = 0; i < ref.size(); ++i)
                if (!std::isfinite(ref.data[i])) return false;
        return true;
    }
};

namespace detail {

inline void shape_cell(RecurrentCellParams& cell, const ModelConfig& config) {
    const int h = config.hidden_dim, d = config.input_dim;
    cell.w_in.setZero(h, d);
    cell.u_rec.setZero(h, h);
    cell.b.setZero(h);
    if (config.cell == CellKind::Gated) {
        cell.w_reset_in.setZero(h, d);
        cell.u_reset_rec.setZero(h, h);
        cell.b_reset.setZero(h);
        cell.w_update_in.setZero(h, d);
        cell.u_update_rec.setZero(h, h);
        cell.b_update.setZero(h);
    }
}

}  // namespace detail

// All-zero parameters with the shapes implied by `config`.
inline ModelParams zero_params(const ModelConfig& config) {
    config.validate();
    ModelParams params;
    params.config = config;
    if (config.kind == EncoderKind::Recurrent) {
        detail::shape_cell(params.forward_cell, config);
        detail::shape_cell(params.backward_cell, config);
    }
    const int m = config.encoder_output_dim();
    params.classifier.w_hidden.setZero(config.classifier_hidden_dim, 4 * m);
    params.classifier.b_hidden.setZero(config.classifier_hidden_dim);
    params.classifier.w_out.setZero(kNumLabels, config.classifier_hidden_dim);
    params.classifier.b_out.setZero(kNumLabels);
    return params;
}

// Weight matrices uniform in +-1/sqrt(fan_in); biases zero.
inline ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    ModelParams params = zero_params(config);
    params.init_seed = seed;
    Rng rng(derive_seed(seed, "init"));
    for (auto& ref : params.array_refs()) {
        if (ref.cols == 1) continue;  // bias vector
        const double bound = 1.0 / std::sqrt(static_cast<double>(ref.cols));
        for (Eigen::Index i = 0; i < ref.size(); ++i)
            ref.data[i] = rng.uniform(-bound, bound);
    }
    return params;
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

// Token vectors as columns, in sentence order. Out-of-vocabulary tokens map
// to the zero vector and are counted through `oov_count`.
inline Eigen::MatrixXd embed_tokens(const Sentence& sentence, const EmbeddingTable& table,
                                    std::size_t* oov_count = nullptr) {
    if (sentence.tokens.empty()) throw EmptySentence("cannot encode an empty sentence");
    Eigen::MatrixXd x(table.dim, static_cast<Eigen::Index>(sentence.size()));
    for (std::size_t t = 0; t < sentence.size(); ++t) {
        if (const Eigen::VectorXd* vec = table.lookup(sentence.tokens[t])) {
            x.col(static_cast<Eigen::Index>(t)) = *vec;
        } else {
            x.col(static_cast<Eigen::Index>(t)).setZero();
            if (oov_count) ++*oov_count;
        }
    }
    return x;
}

// Mean of token vectors. Tokens are summed in sorted order so the result is
// bit-identical under any token permutation, which makes the symmetry cap on
// permuted pairs exact rather than approximate.
inline Eigen::VectorXd bow_encode(const Sentence& sentence, const EmbeddingTable& table,
                                  std::size_t* oov_count = nullptr) {
    if (sentence.tokens.empty()) throw EmptySentence("cannot encode an empty sentence");
    std::vector<std::string> tokens = sentence.tokens;
    std::sort(tokens.begin(), tokens.end());
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(table.dim);
    for (const auto& token : tokens) {
        if (const Eigen::VectorXd* vec = table.lookup(token)) sum += *vec;
        else if (oov_count) ++*oov_count;
    }
    return sum / static_cast<double>(tokens.size());
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-direction forward cache kept for backpropagation. Columns are in
// processing order (the backward direction sees the sequence reversed).
struct DirectionCache {
    Eigen::MatrixXd x;        // d x T
    Eigen::MatrixXd r, z, n;  // h x T (gated only)
    Eigen::MatrixXd h;        // h x T
    std::vector<Eigen::Index> argmax;  // per hidden unit, pooling winner
    Eigen::VectorXd pooled;
};

inline void run_direction(const RecurrentCellParams& cell, CellKind kind,
                          const Eigen::MatrixXd& x, DirectionCache& cache) {
    const Eigen::Index h = cell.b.size();
    const Eigen::Index steps = x.cols();
    cache.x = x;
    cache.h.resize(h, steps);
    // Input projections for all steps at once.
    const Eigen::MatrixXd wx = cell.w_in * x;
    Eigen::MatrixXd wrx, wzx;
    if (kind == CellKind::Gated) {
        cache.r.resize(h, steps);
        cache.z.resize(h, steps);
        cache.n.resize(h, steps);
        wrx = cell.w_reset_in * x;
        wzx = cell.w_update_in * x;
    }
    Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(h);
    for (Eigen::Index t = 0; t < steps; ++t) {
        if (kind == CellKind::Gated) {
            Eigen::VectorXd r =
                (wrx.col(t) + cell.u_reset_rec * h_prev + cell.b_reset).unaryExpr(&sigmoid);
            Eigen::VectorXd z =
                (wzx.col(t) + cell.u_update_rec * h_prev + cell.b_update).unaryExpr(&sigmoid);
            Eigen::VectorXd n =
                (wx.col(t) + cell.u_rec * r.cwiseProduct(h_prev) + cell.b).array().tanh().matrix();
            cache.r.col(t) = r;
            cache.z.col(t) = z;
            cache.n.col(t) = n;
            cache.h.col(t) = z.cwiseProduct(h_prev) + (Eigen::VectorXd::Ones(h) - z).cwiseProduct(n);
        } else {
            cache.h.col(t) = (wx.col(t) + cell.u_rec * h_prev + cell.b).array().tanh().matrix();
        }
        h_prev = cache.h.col(t);
    }
    // Element-wise max pooling over time; first winner on ties.
    cache.pooled.resize(h);
    cache.argmax.assign(static_cast<std::size_t>(h), 0);
    for (Eigen::Index j = 0; j < h; ++j) {
        double best = cache.h(j, 0);
        Eigen::Index best_t = 0;
        for (Eigen::Index t = 1; t < steps; ++t) {
            if (cache.h(j, t) > best) {
                best = cache.h(j, t);
                best_t = t;
            }
        }
        cache.pooled[j] = best;
        cache.argmax[static_cast<std::size_t>(j)] = best_t;
    }
}

// Backpropagation through pooling and the recurrence; accumulates into
// `grads` and leaves nothing for the (fixed) word vectors.
inline void backward_direction(const RecurrentCellParams& cell, CellKind kind,
                               const DirectionCache& cache, const Eigen::VectorXd& dpooled,
                               RecurrentCellParams& grads) {
    const Eigen::Index h = cell.b.size();
    const Eigen::Index steps = cache.x.cols();
    Eigen::VectorXd carry = Eigen::VectorXd::Zero(h);
    for (Eigen::Index t = steps - 1; t >= 0; --t) {
        Eigen::VectorXd dh = carry;
        for (Eigen::Index j = 0; j < h; ++j)
            if (cache.argmax[static_cast<std::size_t>(j)] == t) dh[j] += dpooled[j];

        const Eigen::VectorXd h_prev =
            t == 0 ? Eigen::VectorXd::Zero(h) : Eigen::VectorXd(cache.h.col(t - 1));
        if (kind == CellKind::Gated) {
            const Eigen::VectorXd r = cache.r.col(t), z = cache.z.col(t), n = cache.n.col(t);
            const Eigen::VectorXd dz = dh.cwiseProduct(h_prev - n);
            const Eigen::VectorXd dn = dh.cwiseProduct(Eigen::VectorXd::Ones(h) - z);
            Eigen::VectorXd dh_prev = dh.cwiseProduct(z);

            const Eigen::VectorXd dan =
                dn.cwiseProduct((Eigen::VectorXd::Ones(h) - n.cwiseProduct(n)));
            grads.w_in += dan * cache.x.col(t).transpose();
            grads.u_rec += dan * r.cwiseProduct(h_prev).transpose();
            grads.b += dan;
            const Eigen::VectorXd drh = cell.u_rec.transpose() * dan;
            const Eigen::VectorXd dr = drh.cwiseProduct(h_prev);
            dh_prev += drh.cwiseProduct(r);

            const Eigen::VectorXd dar =
                dr.cwiseProduct(r).cwiseProduct(Eigen::VectorXd::Ones(h) - r);
            grads.w_reset_in += dar * cache.x.col(t).transpose();
            grads.u_reset_rec += dar * h_prev.transpose();
            grads.b_reset += dar;
            dh_prev += cell.u_reset_rec.transpose() * dar;

            const Eigen::VectorXd daz =
                dz.cwiseProduct(z).cwiseProduct(Eigen::VectorXd::Ones(h) - z);
            grads.w_update_in += daz * cache.x.col(t).transpose();
            grads.u_update_rec += daz * h_prev.transpose();
            grads.b_update += daz;
            dh_prev += cell.u_update_rec.transpose() * daz;

            carry = dh_prev;
        } else {
            const Eigen::VectorXd ht = cache.h.col(t);
            const Eigen::VectorXd da =
                dh.cwiseProduct(Eigen::VectorXd::Ones(h) - ht.cwiseProduct(ht));
            grads.w_in += da * cache.x.col(t).transpose();
            grads.u_rec += da * h_prev.transpose();
            grads.b += da;
            carry = cell.u_rec.transpose() * da;
        }
    }
}

// Bidirectional encoder cache for one sentence.
struct SentenceCache {
    DirectionCache forward, backward;
    Eigen::VectorXd output;  // 2h
};

inline void encode_recurrent(const ModelParams& params, const Eigen::MatrixXd& x,
                             SentenceCache& cache) {
    run_direction(params.forward_cell, params.config.cell, x, cache.forward);
    run_direction(params.backward_cell, params.config.cell, x.rowwise().reverse(), cache.backward);
    cache.output.resize(2 * params.config.hidden_dim);
    cache.output << cache.forward.pooled, cache.backward.pooled;
}

inline void backward_recurrent(const ModelParams& params, const SentenceCache& cache,
                               const Eigen::VectorXd& doutput, ModelParams& grads) {
    const int h = params.config.hidden_dim;
    backward_direction(params.forward_cell, params.config.cell, cache.forward, doutput.head(h),
                       grads.forward_cell);
    backward_direction(params.backward_cell, params.config.cell, cache.backward, doutput.tail(h),
                       grads.backward_cell);
}

}  // namespace detail

// Bidirectional recurrent encoding with max pooling over time; output length
// is 2 x hidden_dim.
inline Eigen::VectorXd rnn_encode(const Sentence& sentence, const ModelParams& params,
                                  const EmbeddingTable& table, std::size_t* oov_count = nullptr) {
    if (params.config.kind != EncoderKind::Recurrent)
        throw ShapeError("rnn_encode requires a recurrent model");
    if (table.dim != params.config.input_dim)
        throw ShapeError("embedding dim " + std::to_string(table.dim) + " != model input dim " +
                         std::to_string(params.config.input_dim));
    detail::SentenceCache cache;
    detail::encode_recurrent(params, embed_tokens(sentence, table, oov_count), cache);
    return cache.output;
}

inline Eigen::VectorXd encode_sentence(const Sentence& sentence, const ModelParams& params,
                                       const EmbeddingTable& table,
                                       std::size_t* oov_count = nullptr) {
    if (params.config.kind == EncoderKind::Bow) return bow_encode(sentence, table, oov_count);
    return rnn_encode(sentence, params, table, oov_count);
}

// ---------------------------------------------------------------------------
// Classifier
// ---------------------------------------------------------------------------

// (u, v, |u-v|, u*v) feature combination.
inline Eigen::VectorXd build_features(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    if (u.size() != v.size()) throw ShapeError("premise/hypothesis encodings differ in length");
    const Eigen::Index m = u.size();
    Eigen::VectorXd features(4 * m);
    features << u, v, (u - v).cwiseAbs(), u.cwiseProduct(v);
    return features;
}

inline Eigen::Vector3d softmax3(const Eigen::Vector3d& logits) {
    const double peak = logits.maxCoeff();
    Eigen::Vector3d exps = (logits.array() - peak).exp().matrix();
    return exps / exps.sum();
}

// Probability triple over (entailment, neutral, contradiction).
inline Eigen::Vector3d classify_pair(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                                     const ModelParams& params) {
    const Eigen::Index m = params.config.encoder_output_dim();
    if (u.size() != m || v.size() != m)
        throw ShapeError("encodings of length " + std::to_string(u.size()) + "/" +
                         std::to_string(v.size()) + " do not match encoder output dim " +
                         std::to_string(m));
    const Eigen::VectorXd features = build_features(u, v);
    const Eigen::VectorXd hidden =
        (params.classifier.w_hidden * features + params.classifier.b_hidden).array().tanh().matrix();
    return softmax3(params.classifier.w_out * hidden + params.classifier.b_out);
}

// Argmax with lowest-index tie break in label order.
inline Label predict_from_probs(const Eigen::Vector3d& probs) {
    int best = 0;
    for (int lab = 1; lab < kNumLabels; ++lab)
        if (probs[lab] > probs[best]) best = lab;
    return static_cast<Label>(best);
}

inline Label predict_pair(const SentencePair& pair, const ModelParams& params,
                          const EmbeddingTable& table, std::size_t* oov_count = nullptr) {
    return predict_from_probs(classify_pair(encode_sentence(pair.premise, params, table, oov_count),
                                            encode_sentence(pair.hypothesis, params, table, oov_count),
                                            params));
}

// ---------------------------------------------------------------------------
// Loss and gradients
// ---------------------------------------------------------------------------

// Pre-embedded pair; the training loop caches these once per corpus.
struct EncodedPair {
    Eigen::MatrixXd premise;    // d x T matrices for the recurrent path
    Eigen::MatrixXd hypothesis;
    Eigen::VectorXd premise_bow, hypothesis_bow;  // BOW path
    int label = 0;
};

inline EncodedPair encode_pair(const SentencePair& pair, const ModelConfig& config,
                               const EmbeddingTable& table, std::size_t* oov_count = nullptr) {
    if (!pair.label) throw MissingLabel("pair \"" + pair.premise.text() + "\" has no label");
    EncodedPair enc;
    enc.label = static_cast<int>(*pair.label);
    if (config.kind == EncoderKind::Recurrent) {
        enc.premise = embed_tokens(pair.premise, table, oov_count);
        enc.hypothesis = embed_tokens(pair.hypothesis, table, oov_count);
    } else {
        enc.premise_bow = bow_encode(pair.premise, table, oov_count);
        enc.hypothesis_bow = bow_encode(pair.hypothesis, table, oov_count);
    }
    return enc;
}

inline std::vector<EncodedPair> encode_corpus(const Corpus& corpus, const ModelConfig& config,
                                              const EmbeddingTable& table,
                                              std::size_t* oov_count = nullptr) {
    std::vector<EncodedPair> encoded;
    encoded.reserve(corpus.size());
    for (const auto& pair : corpus.pairs) encoded.push_back(encode_pair(pair, config, table, oov_count));
    return encoded;
}

namespace detail {

// Single-example loss and gradient accumulation; returns -log p(gold).
inline double example_backward(const ModelParams& params, const EncodedPair& example,
                               ModelParams& grads) {
    SentenceCache premise_cache, hypothesis_cache;
    Eigen::VectorXd u, v;
    const bool recurrent = params.config.kind == EncoderKind::Recurrent;
    if (recurrent) {
        encode_recurrent(params, example.premise, premise_cache);
        encode_recurrent(params, example.hypothesis, hypothesis_cache);
        u = premise_cache.output;
        v = hypothesis_cache.output;
    } else {
        u = example.premise_bow;
        v = example.hypothesis_bow;
    }

    const Eigen::VectorXd features = build_features(u, v);
    const Eigen::VectorXd pre_hidden =
        params.classifier.w_hidden * features + params.classifier.b_hidden;
    const Eigen::VectorXd hidden = pre_hidden.array().tanh().matrix();
    const Eigen::Vector3d probs = softmax3(params.classifier.w_out * hidden + params.classifier.b_out);
    const double loss = -std::log(std::max(probs[example.label], 1e-300));

    Eigen::Vector3d dlogits = probs;
    dlogits[example.label] -= 1.0;
    grads.classifier.w_out += dlogits * hidden.transpose();
    grads.classifier.b_out += dlogits;
    const Eigen::VectorXd dhidden = params.classifier.w_out.transpose() * dlogits;
    const Eigen::VectorXd dpre =
        dhidden.cwiseProduct(Eigen::VectorXd::Ones(hidden.size()) - hidden.cwiseProduct(hidden));
    grads.classifier.w_hidden += dpre * features.transpose();
    grads.classifier.b_hidden += dpre;

    if (recurrent) {
        const Eigen::VectorXd dfeatures = params.classifier.w_hidden.transpose() * dpre;
        const Eigen::Index m = u.size();
        const Eigen::VectorXd sign =
            (u - v).unaryExpr([](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); });
        const Eigen::VectorXd du = dfeatures.head(m) +
                                   sign.cwiseProduct(dfeatures.segment(2 * m, m)) +
                                   v.cwiseProduct(dfeatures.tail(m));
        const Eigen::VectorXd dv = dfeatures.segment(m, m) -
                                   sign.cwiseProduct(dfeatures.segment(2 * m, m)) +
                                   u.cwiseProduct(dfeatures.tail(m));
        backward_recurrent(params, premise_cache, du, grads);
        backward_recurrent(params, hypothesis_cache, dv, grads);
    }
    return loss;
}

inline int worker_threads() {
    if (const char* env = std::getenv("SYSPROBE_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

}  // namespace detail

struct LossAndGradients {
    double loss = 0.0;
    ModelParams gradients;
};

// Mean cross-entropy over the batch plus gradients for every parameter
// array. Work is split into fixed 16-example chunks with one accumulator
// each; chunks are reduced in index order, so results are bit-identical for
// any SYSPROBE_THREADS setting.
inline LossAndGradients loss_and_gradients(const std::vector<EncodedPair>& batch,
                                           const ModelParams& params) {
    if (batch.empty()) throw EmptyCorpus("loss_and_gradients: empty batch");
    constexpr std::size_t kChunk = 16;
    const std::size_t n_chunks = (batch.size() + kChunk - 1) / kChunk;

    std::vector<ModelParams> chunk_grads(n_chunks, zero_params(params.config));
    std::vector<double> chunk_loss(n_chunks, 0.0);
    auto run_chunk = [&](std::size_t chunk) {
        const std::size_t lo = chunk * kChunk;
        const std::size_t hi = std::min(lo + kChunk, batch.size());
        for (std::size_t i = lo; i < hi; ++i)
            chunk_loss[chunk] += detail::example_backward(params, batch[i], chunk_grads[chunk]);
    };

    const int threads = std::min<int>(detail::worker_threads(), static_cast<int>(n_chunks));
    if (threads <= 1) {
        for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) run_chunk(chunk);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t chunk = static_cast<std::size_t>(w); chunk < n_chunks;
                     chunk += static_cast<std::size_t>(threads))
                    run_chunk(chunk);
            });
        for (auto& t : pool) t.join();
    }

    LossAndGradients result;
    result.gradients = std::move(chunk_grads[0]);
    result.loss = chunk_loss[0];
    auto dest = result.gradients.array_refs();
    for (std::size_t chunk = 1; chunk < n_chunks; ++chunk) {
        auto src = chunk_grads[chunk].array_refs();
        for (std::size_t a = 0; a < dest.size(); ++a)
            Eigen::Map<Eigen::VectorXd>(dest[a].data, dest[a].size()) +=
                Eigen::Map<const Eigen::VectorXd>(src[a].data, src[a].size());
        result.loss += chunk_loss[chunk];
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    result.loss *= scale;
    for (auto& ref : dest)
        Eigen::Map<Eigen::VectorXd>(ref.data, ref.size()) *= scale;
    return result;
}

// Convenience overload on raw sentence pairs.
inline LossAndGradients loss_and_gradients(const std::vector<SentencePair>& batch,
                                           const ModelParams& params, const EmbeddingTable& table,
                                           std::size_t* oov_count = nullptr) {
    std::vector<EncodedPair> encoded;
    encoded.reserve(batch.size());
    for (const auto& pair : batch) encoded.push_back(encode_pair(pair, params.config, table, oov_count));
    return loss_and_gradients(encoded, params);
}

}  // namespace sysprobe::model
