#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "sysprobe/errors.hpp"
#include "sysprobe/rng.hpp"

namespace sysprobe {

// Word -> d-dimensional vector. Vectors are fixed lexical inputs; the model
// never updates them.
struct EmbeddingTable {
    int dim = 0;
    std::unordered_map<std::string, Eigen::VectorXd> entries;
    std::size_t duplicates_replaced = 0;  // load diagnostic

    EmbeddingTable() = default;
    explicit EmbeddingTable(int d) : dim(d) {
        if (d < 1) throw RangeError("embedding dim must be >= 1");
    }

    const Eigen::VectorXd* lookup(const std::string& word) const {
        auto it = entries.find(word);
        return it == entries.end() ? nullptr : &it->second;
    }

    bool contains(const std::string& word) const { return entries.count(word) > 0; }

    void add(const std::string& word, Eigen::VectorXd vec) {
        if (vec.size() != dim)
            throw ShapeError("embedding for \"" + word + "\" has length " +
                             std::to_string(vec.size()) + ", expected " + std::to_string(dim));
        if (!vec.allFinite()) throw ParseError("non-finite embedding for \"" + word + "\"");
        if (entries.count(word)) ++duplicates_replaced;
        entries[word] = std::move(vec);
    }

    std::size_t size() const { return entries.size(); }
};

// `word f1 f2 ... fdim` per line, single-space separated, no header.
inline EmbeddingTable load_embeddings_stream(std::istream& in, int dim) {
    EmbeddingTable table(dim);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string word;
        if (!(fields >> word)) throw ParseError("missing word", line_no);
        Eigen::VectorXd vec(dim);
        for (int i = 0; i < dim; ++i) {
            if (!(fields >> vec[i]))
                throw ParseError("expected " + std::to_string(dim) + " floats after \"" + word + "\"",
                                 line_no);
        }
        std::string extra;
        if (fields >> extra)
            throw ParseError("trailing field \"" + extra + "\" after " + std::to_string(dim) +
                                 " floats",
                             line_no);
        table.add(word, std::move(vec));
    }
    return table;
}

inline EmbeddingTable load_embeddings(const std::string& path, int dim) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding file: " + path);
    return load_embeddings_stream(in, dim);
}

inline void save_embeddings(const EmbeddingTable& table, std::ostream& out) {
    // Deterministic order for reproducible files.
    std::vector<std::string> words;
    words.reserve(table.entries.size());
    for (const auto& [word, vec] : table.entries) words.push_back(word);
    std::sort(words.begin(), words.end());
    out.precision(17);
    for (const auto& word : words) {
        out << word;
        const auto& vec = table.entries.at(word);
        for (int i = 0; i < table.dim; ++i) out << ' ' << vec[i];
        out << '\n';
    }
}

// I.i.d. standard-normal vector; a pure function of (dim, seed).
inline Eigen::VectorXd random_embedding(int dim, std::uint64_t seed) {
    if (dim < 1) throw RangeError("embedding dim must be >= 1");
    Rng rng(derive_seed(seed, "random_embedding"));
    Eigen::VectorXd vec(dim);
    for (int i = 0; i < dim; ++i) vec[i] = rng.gaussian();
    return vec;
}

// Gaussian vectors for a whole vocabulary. Each word's vector depends only on
// (word, dim, seed), not on insertion order, so growing the vocabulary never
// perturbs existing entries.
inline EmbeddingTable synthetic_embeddings(const std::vector<std::string>& words, int dim,
                                           std::uint64_t seed) {
    EmbeddingTable table(dim);
    for (const auto& word : words)
        table.add(word, random_embedding(dim, derive_seed(seed, word)));
    return table;
}

}  // namespace sysprobe
