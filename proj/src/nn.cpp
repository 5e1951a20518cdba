#include "moew/nn.hpp"

#include "moew/errors.hpp"
#include "moew/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace moew {

const char* to_string(LossKind kind) {
    switch (kind) {
    case LossKind::squared: return "squared";
    case LossKind::hinge: return "hinge";
    case LossKind::cross_entropy: return "cross_entropy";
    }
    return "?";
}

void MlpArchitecture::validate() const {
    if (layer_sizes.size() < 2) throw ContractError("architecture needs at least input and output layers");
    for (int s : layer_sizes)
        if (s < 1) throw ContractError("layer sizes must be positive");
    if (output_kind != OutputKind::logits && layer_sizes.back() != 1)
        throw ContractError("linear and score outputs must have width 1");
}

Eigen::Index ModelParams::num_values() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

bool ModelParams::all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l)
        if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    return true;
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        z.weights.push_back(Matrix::Zero(weights[l].rows(), weights[l].cols()));
        z.biases.push_back(Vector::Zero(biases[l].size()));
    }
    return z;
}

void ModelParams::scale(double gamma) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] *= gamma;
        biases[l] *= gamma;
    }
}

Vector ModelParams::flatten() const {
    Vector out(num_values());
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
            for (Eigen::Index c = 0; c < weights[l].cols(); ++c) out[k++] = weights[l](r, c);
        for (Eigen::Index c = 0; c < biases[l].size(); ++c) out[k++] = biases[l][c];
    }
    return out;
}

void ModelParams::unflatten(const Vector& flat) {
    if (flat.size() != num_values()) throw ContractError("flat parameter vector has the wrong length");
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
            for (Eigen::Index c = 0; c < weights[l].cols(); ++c) weights[l](r, c) = flat[k++];
        for (Eigen::Index c = 0; c < biases[l].size(); ++c) biases[l][c] = flat[k++];
    }
}

void TrainConfig::validate() const {
    if (steps < 1) throw ContractError("steps must be >= 1");
    if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be > 0");
    if (batch_size < 1) throw ContractError("batch_size must be >= 1");
}

Objective single_loss(LossKind kind, Eigen::Index width) {
    return {LossTerm{kind, 0, width, 0, 1.0}};
}

Matrix label_targets(const Vector& labels, LossKind kind) {
    Matrix t(labels.size(), 1);
    if (kind == LossKind::hinge)
        t.col(0) = (2.0 * labels.array() - 1.0).matrix();
    else
        t.col(0) = labels;
    return t;
}

LossKind default_loss(LabelKind kind) {
    switch (kind) {
    case LabelKind::regression: return LossKind::squared;
    case LabelKind::binary: return LossKind::hinge;
    case LabelKind::multiclass: return LossKind::cross_entropy;
    }
    return LossKind::squared;
}

OutputKind default_output(LabelKind kind) {
    switch (kind) {
    case LabelKind::regression: return OutputKind::linear;
    case LabelKind::binary: return OutputKind::score;
    case LabelKind::multiclass: return OutputKind::logits;
    }
    return OutputKind::linear;
}

int output_width(const Dataset& ds) {
    return ds.label_kind == LabelKind::multiclass ? ds.num_classes : 1;
}

ModelParams init_params(const MlpArchitecture& arch, std::uint64_t seed) {
    arch.validate();
    Rng rng(seed);
    ModelParams p;
    for (std::size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
        const int fan_in = arch.layer_sizes[l];
        const int fan_out = arch.layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> unif(-limit, limit);
        Matrix w(fan_in, fan_out);
        for (int r = 0; r < fan_in; ++r)
            for (int c = 0; c < fan_out; ++c) w(r, c) = unif(rng);
        p.weights.push_back(std::move(w));
        p.biases.push_back(Vector::Zero(fan_out));
    }
    return p;
}

namespace {

inline void sigmoid_inplace(Matrix& m) {
    m = m.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

void check_targets(const Matrix& outputs, const Matrix& targets, const Objective& objective) {
    for (const auto& term : objective) {
        if (term.output_offset + term.width > outputs.cols())
            throw ContractError("loss term exceeds model output width");
        Eigen::Index tw = term.kind == LossKind::squared ? term.width : 1;
        if (term.target_offset + tw > targets.cols()) throw ContractError("loss term exceeds target width");
        if (term.kind == LossKind::hinge && term.width != 1) throw ContractError("hinge loss needs width 1");
    }
}

/// Reusable buffers for repeated forward/backward passes on batches of one size.
class Backprop {
public:
    /// Returns the weighted batch loss and writes its gradient into `grad`.
    double run(const ModelParams& params, const Matrix& x, const Matrix& targets, const Vector& weights,
               const Objective& objective, ModelParams& grad) {
        const std::size_t layers = params.num_layers();
        const Eigen::Index rows = x.rows();
        acts_.resize(layers + 1);
        deltas_.resize(layers);
        acts_[0] = x;
        for (std::size_t l = 0; l < layers; ++l) {
            acts_[l + 1].noalias() = acts_[l] * params.weights[l];
            acts_[l + 1].rowwise() += params.biases[l].transpose();
            if (l + 1 < layers) sigmoid_inplace(acts_[l + 1]);
        }
        const Matrix& out = acts_[layers];
        Matrix& delta = deltas_[layers - 1];
        delta.setZero(rows, out.cols());
        const double inv_rows = 1.0 / static_cast<double>(rows);
        double loss = 0.0;
        for (const auto& term : objective) {
            const double coef = term.coefficient;
            for (Eigen::Index i = 0; i < rows; ++i) {
                const double wi = weights[i] * coef * inv_rows;
                switch (term.kind) {
                case LossKind::squared: {
                    const double inv_w = 1.0 / static_cast<double>(term.width);
                    double li = 0.0;
                    for (Eigen::Index c = 0; c < term.width; ++c) {
                        double r = out(i, term.output_offset + c) - targets(i, term.target_offset + c);
                        li += r * r;
                        delta(i, term.output_offset + c) += wi * 2.0 * r * inv_w;
                    }
                    loss += wi * li * inv_w;
                    break;
                }
                case LossKind::hinge: {
                    const double t = targets(i, term.target_offset);
                    const double margin = 1.0 - t * out(i, term.output_offset);
                    if (margin > 0.0) {
                        loss += wi * margin;
                        delta(i, term.output_offset) -= wi * t;
                    }
                    break;
                }
                case LossKind::cross_entropy: {
                    const auto y = static_cast<Eigen::Index>(targets(i, term.target_offset));
                    if (y < 0 || y >= term.width) throw ContractError("class index outside logits width");
                    double mx = out(i, term.output_offset);
                    for (Eigen::Index c = 1; c < term.width; ++c) mx = std::max(mx, out(i, term.output_offset + c));
                    double z = 0.0;
                    for (Eigen::Index c = 0; c < term.width; ++c) z += std::exp(out(i, term.output_offset + c) - mx);
                    const double lse = mx + std::log(z);
                    loss += wi * (lse - out(i, term.output_offset + y));
                    for (Eigen::Index c = 0; c < term.width; ++c) {
                        double p = std::exp(out(i, term.output_offset + c) - lse);
                        delta(i, term.output_offset + c) += wi * (p - (c == y ? 1.0 : 0.0));
                    }
                    break;
                }
                }
            }
        }
        for (std::size_t l = layers; l-- > 0;) {
            grad.weights[l].noalias() = acts_[l].transpose() * deltas_[l];
            grad.biases[l] = deltas_[l].colwise().sum().transpose();
            if (l > 0) {
                deltas_[l - 1].noalias() = deltas_[l] * params.weights[l].transpose();
                deltas_[l - 1].array() *= acts_[l].array() * (1.0 - acts_[l].array());
            }
        }
        return loss;
    }

private:
    std::vector<Matrix> acts_;
    std::vector<Matrix> deltas_;
};

void check_shapes(const ModelParams& params, const Matrix& features) {
    if (params.weights.empty()) throw ContractError("model has no layers");
    if (features.cols() != params.input_dim())
        throw ContractError("feature dimension " + std::to_string(features.cols()) +
                            " does not match model input " + std::to_string(params.input_dim()));
}

} // namespace

Matrix predict(const ModelParams& params, const Matrix& features) {
    check_shapes(params, features);
    Matrix a = features;
    const std::size_t layers = params.num_layers();
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix z = a * params.weights[l];
        z.rowwise() += params.biases[l].transpose();
        if (l + 1 < layers) sigmoid_inplace(z);
        a = std::move(z);
    }
    return a;
}

Vector predict_scores(const ModelParams& params, const Matrix& features) {
    Matrix out = predict(params, features);
    if (out.cols() == 1) return out.col(0);
    Vector cls(out.rows());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        Eigen::Index arg = 0;
        out.row(i).maxCoeff(&arg);
        cls[i] = static_cast<double>(arg);
    }
    return cls;
}

std::vector<int> predict_classes(const ModelParams& params, const Matrix& features) {
    Matrix out = predict(params, features);
    std::vector<int> cls(static_cast<std::size_t>(out.rows()));
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        Eigen::Index arg = 0;
        if (out.cols() == 1) arg = out(i, 0) > 0.0 ? 1 : 0;
        else out.row(i).maxCoeff(&arg);
        cls[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return cls;
}

LossAndGrad loss_and_grad(const ModelParams& params, const Matrix& features, const Matrix& targets,
                          const Vector& weights, const Objective& objective) {
    check_shapes(params, features);
    if (targets.rows() != features.rows() || weights.size() != features.rows())
        throw ContractError("batch features, targets and weights must have equal rows");
    check_targets(Matrix::Zero(1, params.output_dim()), targets, objective);
    LossAndGrad out;
    out.grad = params.zeros_like();
    Backprop bp;
    out.loss = bp.run(params, features, targets, weights, objective, out.grad);
    return out;
}

LossAndGrad loss_and_grad(const ModelParams& params, const Matrix& features, const Vector& labels,
                          const Vector& weights, LossKind kind) {
    const Eigen::Index width = kind == LossKind::cross_entropy ? params.output_dim() : 1;
    return loss_and_grad(params, features, label_targets(labels, kind), weights, single_loss(kind, width));
}

ModelParams train(ModelParams params, const Matrix& features, const Matrix& targets, const Vector& weights,
                  const Objective& objective, const TrainConfig& cfg) {
    cfg.validate();
    check_shapes(params, features);
    const Eigen::Index n = features.rows();
    if (n < 1) throw ContractError("training set is empty");
    if (targets.rows() != n || weights.size() != n)
        throw ContractError("features, targets and weights must have equal rows");
    if (!weights.allFinite()) throw ContractError("weights must be finite");
    if ((weights.array() < 0.0).any()) throw ContractError("weights must be non-negative");
    if (!(weights.sum() > 0.0)) throw ContractError("weights must not all be zero");
    check_targets(Matrix::Zero(1, params.output_dim()), targets, objective);

    const bool full_batch = cfg.batch_size >= n;
    const Eigen::Index bs = full_batch ? n : cfg.batch_size;

    Rng rng(derive_seed(cfg.seed, {1}));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::size_t cursor = order.size();

    Matrix bx(bs, features.cols()), bt(bs, targets.cols());
    Vector bw(bs);
    ModelParams grad = params.zeros_like();
    ModelParams m = params.zeros_like();
    ModelParams v = params.zeros_like();
    Backprop bp;

    double b1t = 1.0, b2t = 1.0;
    for (long step = 0; step < cfg.steps; ++step) {
        double loss = 0.0;
        if (full_batch) {
            loss = bp.run(params, features, targets, weights, objective, grad);
        } else {
            if (cursor >= order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const auto take = static_cast<Eigen::Index>(std::min<std::size_t>(bs, order.size() - cursor));
            if (take != bx.rows()) {
                bx.resize(take, features.cols());
                bt.resize(take, targets.cols());
                bw.resize(take);
            }
            for (Eigen::Index r = 0; r < take; ++r) {
                const Eigen::Index src = order[cursor + static_cast<std::size_t>(r)];
                bx.row(r) = features.row(src);
                bt.row(r) = targets.row(src);
                bw[r] = weights[src];
            }
            cursor += static_cast<std::size_t>(take);
            loss = bp.run(params, bx, bt, bw, objective, grad);
            if (take != bs) {
                bx.resize(bs, features.cols());
                bt.resize(bs, targets.cols());
                bw.resize(bs);
            }
        }
        if (!std::isfinite(loss)) throw DivergenceError(step);

        b1t *= cfg.adam_beta1;
        b2t *= cfg.adam_beta2;
        const double c1 = 1.0 / (1.0 - b1t);
        const double c2 = 1.0 / (1.0 - b2t);
        for (std::size_t l = 0; l < params.num_layers(); ++l) {
            auto update = [&](auto& p, auto& mm, auto& vv, const auto& g) {
                mm = cfg.adam_beta1 * mm + (1.0 - cfg.adam_beta1) * g;
                vv.array() = cfg.adam_beta2 * vv.array() + (1.0 - cfg.adam_beta2) * g.array().square();
                p.array() -= cfg.learning_rate * (mm.array() * c1) / ((vv.array() * c2).sqrt() + cfg.adam_eps);
            };
            update(params.weights[l], m.weights[l], v.weights[l], grad.weights[l]);
            update(params.biases[l], m.biases[l], v.biases[l], grad.biases[l]);
        }
    }
    if (!params.all_finite()) throw DivergenceError(cfg.steps);
    return params;
}

ModelParams train_weighted(const Dataset& train_set, const Vector& weights, const MlpArchitecture& arch,
                           const TrainConfig& cfg) {
    arch.validate();
    if (arch.input_dim() != train_set.dim()) throw ContractError("architecture input does not match features");
    if (weights.size() != train_set.size()) throw ContractError("weight vector length must equal n");
    const Eigen::Index width = cfg.loss == LossKind::cross_entropy ? arch.output_dim() : 1;
    if (cfg.loss != LossKind::cross_entropy && arch.output_dim() != 1)
        throw ContractError("non-logit losses need a single output");
    auto init = init_params(arch, derive_seed(cfg.seed, {0}));
    return train(std::move(init), train_set.features, label_targets(train_set.labels, cfg.loss), weights,
                 single_loss(cfg.loss, width), cfg);
}

ModelParams train_uniform(const Dataset& train_set, const MlpArchitecture& arch, const TrainConfig& cfg) {
    return train_weighted(train_set, Vector::Ones(train_set.size()), arch, cfg);
}

} // namespace moew
