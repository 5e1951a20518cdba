#include "moew/embed.hpp"

#include "moew/errors.hpp"
#include "moew/random.hpp"

#include <cmath>

namespace moew {

void AutoencoderConfig::validate() const {
    if (dim < 1) throw ContractError("embedding dimension must be >= 1");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("lambda must lie in [0,1]");
    for (int h : hidden)
        if (h < 1) throw ContractError("hidden widths must be positive");
    train.validate();
}

int label_encoding_width(LabelKind kind, int num_classes) {
    return kind == LabelKind::multiclass ? num_classes : 1;
}

Matrix autoencoder_inputs(const Matrix& features, const Vector& labels, LabelKind kind, int num_classes) {
    const Eigen::Index n = features.rows();
    const int lw = label_encoding_width(kind, num_classes);
    Matrix in(n, features.cols() + lw);
    in.leftCols(features.cols()) = features;
    auto label_block = in.rightCols(lw);
    switch (kind) {
    case LabelKind::regression: label_block.col(0) = labels; break;
    case LabelKind::binary: label_block.col(0) = (2.0 * labels.array() - 1.0).matrix(); break;
    case LabelKind::multiclass:
        label_block.setZero();
        for (Eigen::Index i = 0; i < n; ++i) label_block(i, static_cast<Eigen::Index>(labels[i])) = 1.0;
        break;
    }
    return in;
}

namespace {

Matrix sigmoid(const Matrix& m) {
    return m.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

struct AeLayout {
    MlpArchitecture arch;
    std::size_t encoder_layers = 0;
    Objective objective;
    Matrix targets;
};

AeLayout layout(const Dataset& ds, const AutoencoderConfig& cfg) {
    AeLayout lay;
    const int d_feat = static_cast<int>(ds.dim());
    const int lw = label_encoding_width(ds.label_kind, ds.num_classes);
    const int width = d_feat + lw;
    auto& sizes = lay.arch.layer_sizes;
    sizes.push_back(width);
    for (int h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(cfg.dim);
    for (auto it = cfg.hidden.rbegin(); it != cfg.hidden.rend(); ++it) sizes.push_back(*it);
    sizes.push_back(width);
    lay.arch.output_kind = OutputKind::logits;
    lay.encoder_layers = cfg.hidden.size() + 1;

    const LossKind label_loss = default_loss(ds.label_kind);
    lay.objective.push_back(LossTerm{LossKind::squared, 0, d_feat, 0, cfg.lambda});
    lay.objective.push_back(LossTerm{label_loss, d_feat, lw, d_feat, 1.0 - cfg.lambda});

    lay.targets.resize(ds.size(), d_feat + 1);
    lay.targets.leftCols(d_feat) = ds.features;
    lay.targets.col(d_feat) = label_targets(ds.labels, label_loss).col(0);
    return lay;
}

} // namespace

Matrix Embedder::raw(const Matrix& features, const Vector& labels) const {
    if (features.rows() != labels.size()) throw ContractError("features and labels differ in length");
    if (kind == EmbedderKind::label_passthrough) {
        Matrix z = Matrix::Zero(labels.size(), num_classes);
        for (Eigen::Index i = 0; i < labels.size(); ++i) {
            const auto c = static_cast<Eigen::Index>(labels[i]);
            if (c < 0 || c >= num_classes) throw ContractError("class index out of range");
            z(i, c) = 1.0;
        }
        return z;
    }
    Matrix in = autoencoder_inputs(features, labels, label_kind, num_classes);
    if (in.cols() != encoder.input_dim()) throw ContractError("feature dimension does not match embedder");
    return sigmoid(predict(encoder, in));
}

Matrix Embedder::embed(const Matrix& features, const Vector& labels) const {
    Matrix z = raw(features, labels);
    z.rowwise() -= offsets.transpose();
    return z;
}

Vector Embedder::embed(const Vector& x, double y) const {
    Matrix row = x.transpose();
    Vector lab(1);
    lab[0] = y;
    return embed(row, lab).row(0).transpose();
}

Matrix reconstruct(const ModelParams& network, const Matrix& features, const Vector& labels, LabelKind kind,
                   int num_classes) {
    return predict(network, autoencoder_inputs(features, labels, kind, num_classes));
}

AutoencoderFit fit_autoencoder(const Dataset& train_set, const AutoencoderConfig& cfg) {
    cfg.validate();
    train_set.validate();
    auto lay = layout(train_set, cfg);
    Matrix inputs = autoencoder_inputs(train_set.features, train_set.labels, train_set.label_kind,
                                       train_set.num_classes);
    auto init = init_params(lay.arch, derive_seed(cfg.train.seed, {0}));
    ModelParams net = train(std::move(init), inputs, lay.targets, Vector::Ones(train_set.size()), lay.objective,
                            cfg.train);

    AutoencoderFit fit;
    fit.network = net;
    Embedder& e = fit.embedder;
    e.kind = EmbedderKind::autoencoder;
    e.label_kind = train_set.label_kind;
    e.num_classes = train_set.num_classes;
    for (std::size_t l = 0; l < lay.encoder_layers; ++l) {
        e.encoder.weights.push_back(net.weights[l]);
        e.encoder.biases.push_back(net.biases[l]);
    }
    e.offsets = Vector::Zero(cfg.dim);
    e.offsets = e.raw(train_set.features, train_set.labels).colwise().mean().transpose();

    const Eigen::Index n = train_set.size();
    const Vector ones = Vector::Ones(n);
    auto term_loss = [&](const LossTerm& t) {
        LossTerm unit = t;
        unit.coefficient = 1.0;
        return loss_and_grad(net, inputs, lay.targets, ones, Objective{unit}).loss;
    };
    fit.feature_loss = term_loss(lay.objective[0]);
    fit.label_loss = term_loss(lay.objective[1]);
    return fit;
}

Embedder train_autoencoder(const Dataset& train_set, const AutoencoderConfig& cfg) {
    return fit_autoencoder(train_set, cfg).embedder;
}

Embedder label_passthrough_embedder(const Dataset& train_set) {
    if (train_set.label_kind == LabelKind::regression)
        throw ContractError("label passthrough needs classification labels");
    Embedder e;
    e.kind = EmbedderKind::label_passthrough;
    e.label_kind = train_set.label_kind;
    e.num_classes = train_set.num_classes;
    e.offsets = Vector::Zero(train_set.num_classes);
    for (double y : train_set.labels) e.offsets[static_cast<Eigen::Index>(y)] += 1.0;
    e.offsets /= static_cast<double>(train_set.size());
    return e;
}

} // namespace moew
