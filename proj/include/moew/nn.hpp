#pragma once

#include "moew/data.hpp"

#include <cstdint>
#include <vector>

namespace moew {

enum class OutputKind { linear, score, logits };
enum class LossKind { squared, hinge, cross_entropy };

const char* to_string(LossKind kind);

/// Fully connected network, sigmoid on every hidden layer, raw output layer.
struct MlpArchitecture {
    std::vector<int> layer_sizes;  // input, hidden..., output
    OutputKind output_kind = OutputKind::linear;

    void validate() const;
    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    std::size_t num_layers() const { return layer_sizes.size() - 1; }
};

/// Weights are stored fan_in x fan_out so that a batch forward pass is X * W + b.
struct ModelParams {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    std::size_t num_layers() const { return weights.size(); }
    int input_dim() const { return static_cast<int>(weights.front().rows()); }
    int output_dim() const { return static_cast<int>(weights.back().cols()); }
    Eigen::Index num_values() const;
    bool all_finite() const;
    ModelParams zeros_like() const;
    void scale(double gamma);
    /// Flattened copy: per layer, row-major weights then biases.
    Vector flatten() const;
    void unflatten(const Vector& flat);
};

struct TrainConfig {
    long steps = 10000;
    double learning_rate = 0.001;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    long batch_size = 100;
    LossKind loss = LossKind::squared;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One additive piece of a composite objective acting on a slice of the outputs.
///   squared:        mean over the slice of (f - t)^2, targets occupy `width` columns
///   hinge:          max(0, 1 - t f), one output, one target column holding +-1
///   cross_entropy:  -log softmax(f)[t], `width` logits, one target column holding the class index
struct LossTerm {
    LossKind kind = LossKind::squared;
    Eigen::Index output_offset = 0;
    Eigen::Index width = 1;
    Eigen::Index target_offset = 0;
    double coefficient = 1.0;
};

using Objective = std::vector<LossTerm>;

/// The objective used for a plain single-output (or C-logit) model.
Objective single_loss(LossKind kind, Eigen::Index width);

/// Labels laid out as targets for `kind`: hinge maps 0/1 to -1/+1.
Matrix label_targets(const Vector& labels, LossKind kind);

/// Loss rule by label type: squared for numeric, hinge for binary, cross-entropy for multiclass.
LossKind default_loss(LabelKind kind);
OutputKind default_output(LabelKind kind);
/// Output width of the main model for a dataset.
int output_width(const Dataset& ds);

ModelParams init_params(const MlpArchitecture& arch, std::uint64_t seed);

Matrix predict(const ModelParams& params, const Matrix& features);

/// Score column for regression / binary models, argmax class for logits models.
Vector predict_scores(const ModelParams& params, const Matrix& features);
std::vector<int> predict_classes(const ModelParams& params, const Matrix& features);

struct LossAndGrad {
    double loss = 0.0;
    ModelParams grad;
};

/// Exact gradient of sum_j w_j * L_j / rows for a batch.
LossAndGrad loss_and_grad(const ModelParams& params, const Matrix& features, const Matrix& targets,
                          const Vector& weights, const Objective& objective);
LossAndGrad loss_and_grad(const ModelParams& params, const Matrix& features, const Vector& labels,
                          const Vector& weights, LossKind kind);

/// Runs cfg.steps Adam updates from `init`; batches are drawn without replacement
/// per epoch and reshuffled every epoch. A batch size >= n uses the full set every step.
ModelParams train(ModelParams init, const Matrix& features, const Matrix& targets, const Vector& weights,
                  const Objective& objective, const TrainConfig& cfg);

/// Weighted-loss minimizer for the main model; initialization and shuffling derive from cfg.seed.
ModelParams train_weighted(const Dataset& train_set, const Vector& weights, const MlpArchitecture& arch,
                           const TrainConfig& cfg);

ModelParams train_uniform(const Dataset& train_set, const MlpArchitecture& arch, const TrainConfig& cfg);

} // namespace moew
