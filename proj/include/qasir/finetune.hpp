#pragma once

#include "qasir/embedding_store.hpp"
#include "qasir/scoring.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace qasir {

// y = weight * x + bias, weight is (out x in).
struct Linear {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
};

// beta * MLP(z) + (1 - beta) * z, ReLU between consecutive linear layers.
struct AdapterParams {
    std::vector<Linear> layers;
    double beta = 0.2;
};

// One post-norm transformer encoder layer (self-attention then feed-forward, each with
// residual + layer norm). Projection weights are (out x in); head h owns rows/columns
// [h*d/H, (h+1)*d/H) of the query/key/value outputs.
struct TemporalEncoderParams {
    int heads = 8;
    double ln_eps = 1e-5;
    Eigen::MatrixXd wq, wk, wv, wo;
    Eigen::VectorXd bq, bk, bv, bo;
    Eigen::MatrixXd ff1_weight;  // f x d
    Eigen::VectorXd ff1_bias;
    Eigen::MatrixXd ff2_weight;  // d x f
    Eigen::VectorXd ff2_bias;
    Eigen::VectorXd ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

struct HeadOptions {
    bool vision_adapter = true;
    bool text_adapter = true;
    bool temporal_encoder = true;

    bool operator==(const HeadOptions&) const = default;
};

struct FineTuneParams {
    AdapterParams vision;
    AdapterParams text;
    TemporalEncoderParams temporal;
    HeadOptions use;

    Eigen::Index dim() const;
};

struct ModelConfig {
    Eigen::Index dim = 0;
    Eigen::Index hidden = 192;
    int adapter_depth = 2;  // number of linear layers per adapter
    double beta_vision = 0.2;
    double beta_text = 0.2;
    int heads = 8;
    Eigen::Index ff_width = 0;  // 0 = 4 * dim
    HeadOptions use;
};

// Linear layers drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)); layer-norm gains 1, biases 0.
FineTuneParams init_params(const ModelConfig& config, std::uint64_t seed);

// Same shapes, every trainable value zero; hyperparameters copied.
FineTuneParams zeros_like(const FineTuneParams& params);

// Mutable view over one trainable tensor, column-major storage of rows x cols doubles.
struct TensorView {
    std::string name;
    double* data = nullptr;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;

    Eigen::Index size() const { return rows * cols; }
};

// Every trainable tensor in a fixed order. `active_only` skips modules disabled in params.use.
std::vector<TensorView> tensors(FineTuneParams& params, bool active_only = false);

Eigen::VectorXd adapter_forward(const AdapterParams& params, const Eigen::VectorXd& z);
// Row-wise adapter over a K x d matrix.
Eigen::MatrixXd adapter_forward_rows(const AdapterParams& params, const Eigen::MatrixXd& rows);

// Entry 2i = sin(k / 10000^(2i/d)), entry 2i+1 = cos(k / 10000^(2i/d)). d must be even.
Eigen::VectorXd positional_encoding(Eigen::Index k, Eigen::Index d);

// Adds PE(k) to row k, then the encoder layer. No dropout.
Eigen::MatrixXd temporal_forward(const TemporalEncoderParams& params, const Eigen::MatrixXd& sequence);

struct ForwardResult {
    double score = 0.0;
    Eigen::VectorXd attended;
    Eigen::VectorXd adapted_query;
    Eigen::VectorXd weights;
};

// vision adapter per row -> temporal encoder -> query attention with the adapted query
// -> cosine against the adapted query.
ForwardResult full_forward(const FineTuneParams& params, const Eigen::MatrixXd& rows, const Eigen::VectorXd& query);

enum class LossMode { literal, infonce };

LossMode parse_loss_mode(const std::string& name);

struct LossConfig {
    LossMode mode = LossMode::infonce;
    double temperature = 0.07;  // infonce only
    double clamp_eps = 1e-6;    // literal only: cosines clamped to >= eps before the log
};

// L = L_q + L_i (a log-likelihood, <= 0). Training minimises objective() = -L.
struct LossValue {
    double query_to_image = 0.0;
    double image_to_query = 0.0;

    double total() const { return query_to_image + image_to_query; }
    double objective() const { return -total(); }
};

// scores(i, j) = similarity of query i with video j; the diagonal holds the positive pairs.
LossValue symmetric_loss(const Eigen::MatrixXd& scores, const LossConfig& config);
// d objective / d scores
Eigen::MatrixXd symmetric_loss_gradient(const Eigen::MatrixXd& scores, const LossConfig& config);

// B positives: videos[i] pairs with queries[i].
struct Batch {
    std::vector<Eigen::MatrixXd> videos;
    std::vector<Eigen::VectorXd> queries;
};

Eigen::MatrixXd batch_scores(const FineTuneParams& params, const Batch& batch);

struct BatchResult {
    LossValue loss;
    Eigen::MatrixXd scores;
    FineTuneParams gradient;  // d objective / d params, same layout as the params
};

// Forward pass over the batch plus analytic gradients of the objective.
BatchResult forward_backward(const FineTuneParams& params, const Batch& batch, const LossConfig& config);

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 64;
    int epochs = 1;
    std::size_t max_steps = 0;  // 0 = run every epoch to completion
    std::uint64_t seed = 0;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    LossConfig loss;
};

// Decoupled weight decay with bias-corrected adaptive moments.
class AdamW {
public:
    AdamW(const FineTuneParams& shape, const TrainConfig& config);
    void step(FineTuneParams& params, FineTuneParams& gradient);

private:
    FineTuneParams first_;
    FineTuneParams second_;
    double lr_, beta1_, beta2_, eps_, decay_;
    long t_ = 0;
};

struct TrainResult {
    FineTuneParams params;
    std::vector<double> loss_history;  // objective per optimizer step
};

// Each batch holds distinct target videos, so off-diagonal entries are true negatives.
// Fully determined by config.seed.
TrainResult train(const EmbeddingStore& store, const FineTuneParams& init, const TrainConfig& config);

void write_loss_csv(const std::filesystem::path& path, std::span<const double> history);

// Checkpoint: "QCKPT", u16 version, u32 tensor count, then per tensor u16 name length,
// name, u8 rank, rank x u32 dims, f32 payload (row-major), little-endian.
std::vector<std::uint8_t> encode_checkpoint(const FineTuneParams& params);
FineTuneParams decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const FineTuneParams& params);
FineTuneParams load_checkpoint(const std::filesystem::path& path);

class FineTunedScorer : public Scorer {
public:
    explicit FineTunedScorer(FineTuneParams params, Pooling mode = Pooling::attention)
        : params_(std::move(params)), mode_(mode) {}

    Eigen::MatrixXd encode_video(const Eigen::MatrixXd& rows) const override;
    Eigen::VectorXd encode_query(const Eigen::VectorXd& query) const override;
    double similarity(const Eigen::MatrixXd& video, const Eigen::VectorXd& query) const override;

    const FineTuneParams& params() const { return params_; }

private:
    FineTuneParams params_;
    Pooling mode_;
};

} // namespace qasir
