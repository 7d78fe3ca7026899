#pragma once

#include "comedia/dataset.hpp"
#include "comedia/prediction.hpp"
#include "comedia/tokenizer.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace comedia {

struct Hyper {
    std::size_t embed_dim = 64;
    std::size_t hidden_dim = 128;
    std::size_t vocab_size = 0;
    std::size_t max_len = kDefaultMaxLen;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 20;
    std::size_t patience = 3;
    std::uint64_t seed = 0;

    /// Throws InvalidArgument naming the offending field.
    void validate() const;
    nlohmann::json to_json() const;
    bool operator==(const Hyper&) const = default;
};

/// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

/// embeddings: vocab x embed, w1: embed x hidden, w2: hidden x 2.
struct Params {
    Matrix embeddings;
    Matrix w1;
    std::vector<double> b1;
    Matrix w2;
    std::vector<double> b2;

    static Params zeros(const Hyper& hyper);

    /// Visits the arrays in checkpoint order: E, W1, b1, W2, b2.
    void for_each_array(const std::function<void(std::span<double>)>& fn);
    void for_each_array(const std::function<void(std::span<const double>)>& fn) const;
    std::size_t parameter_count() const;
    std::string digest() const;

    bool operator==(const Params&) const = default;
};

Params init_params(const Hyper& hyper, std::uint64_t seed);

/// Hidden activations and logits for an already pooled input vector.
struct PooledForward {
    std::vector<double> hidden;
    std::array<double, 2> logits{};
};

PooledForward forward_pooled(const Params& params, std::span<const double> pooled);

/// Mean embedding over the non-PAD prefix of `seq`.
std::vector<double> mean_pool(const Params& params, const TokenSeq& seq);

Prediction forward(const Params& params, const TokenSeq& seq);

struct Sample {
    TokenSeq seq;
    Gender gold = Gender::Male;
};

struct LossAndGrads {
    double loss = 0.0;
    Params grads;
};

/// Mean cross-entropy over the batch with closed-form gradients. The PAD
/// embedding row always gets a zero gradient.
LossAndGrads loss_and_grads(const Params& params, std::span<const Sample* const> batch);

struct AdamState {
    Params m;
    Params v;
};

AdamState adam_init(const Hyper& hyper);

/// One bias-corrected Adam update; `t` is the 1-based step index.
void adam_step(Params& params, const Params& grads, AdamState& state, const Hyper& hyper, std::size_t t);

struct Checkpoint {
    Params params;
    std::string vocab_digest;
    Hyper hyper;
    std::size_t best_epoch = 0;
    double val_macro_f1 = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_macro_f1 = 0.0;
};

struct TrainLog {
    double initial_loss = 0.0;
    std::vector<EpochRecord> epochs;
};

std::vector<Sample> encode_documents(const std::vector<Document>& docs, const Vocab& vocab, std::size_t max_len);

/// Seeded mini-batch Adam with early stopping on validation macro-F1. The
/// returned parameters are rounded to float32, the precision checkpoints
/// store, and the reported F1 is measured on the rounded weights.
Checkpoint train(const std::vector<Document>& train_docs, const std::vector<Document>& val_docs, const Vocab& vocab,
                 Hyper hyper, TrainLog* log = nullptr);

Params round_to_float(Params params);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// When `expected_vocab_digest` is non-empty it must match the checkpoint's.
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_vocab_digest = {});

}  // namespace comedia
