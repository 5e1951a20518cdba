#include "moew/embed.hpp"
#include "moew/errors.hpp"
#include "moew/random.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace moew;

namespace {

Dataset binary_set(std::uint64_t seed, Eigen::Index n) {
    Rng rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Dataset ds;
    ds.features.resize(n, 3);
    ds.labels.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < 3; ++j) ds.features(i, j) = nd(rng);
        ds.labels[i] = ds.features(i, 0) + 0.3 * nd(rng) > 0 ? 1.0 : 0.0;
    }
    ds.label_kind = LabelKind::binary;
    ds.num_classes = 2;
    return ds;
}

AutoencoderConfig small_config(double lambda = 0.5) {
    AutoencoderConfig c;
    c.hidden = {4};
    c.dim = 2;
    c.lambda = lambda;
    c.train.steps = 400;
    c.train.seed = 3;
    return c;
}

} // namespace

TEST(Autoencoder, DefaultLambdaIsHalf) { EXPECT_EQ(AutoencoderConfig{}.lambda, 0.5); }

TEST(Autoencoder, InputsEncodeLabels) {
    const Matrix X{{1.0, 2.0}, {3.0, 4.0}};
    const Matrix bin = autoencoder_inputs(X, Vector{{1.0, 0.0}}, LabelKind::binary, 2);
    EXPECT_EQ(bin, (Matrix{{1.0, 2.0, 1.0}, {3.0, 4.0, -1.0}}));
    const Matrix multi = autoencoder_inputs(X, Vector{{2.0, 0.0}}, LabelKind::multiclass, 3);
    EXPECT_EQ(multi, (Matrix{{1.0, 2.0, 0.0, 0.0, 1.0}, {3.0, 4.0, 1.0, 0.0, 0.0}}));
    const Matrix reg = autoencoder_inputs(X, Vector{{0.5, -7.0}}, LabelKind::regression, 0);
    EXPECT_EQ(reg.col(2), (Vector{{0.5, -7.0}}));
}

TEST(Autoencoder, CenteredMeanIsZero) {
    const Dataset ds = binary_set(1, 200);
    const Embedder e = train_autoencoder(ds, small_config());
    ASSERT_EQ(e.dim(), 2);
    const Matrix z = e.embed(ds);
    EXPECT_LT(z.colwise().mean().cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(z.cwiseAbs().maxCoeff(), 1.0);
    const Matrix raw = e.raw(ds.features, ds.labels);
    EXPECT_GT(raw.minCoeff(), 0.0);
    EXPECT_LT(raw.maxCoeff(), 1.0);
}

TEST(Autoencoder, IdenticalPairsEmbedIdentically) {
    const Dataset ds = binary_set(2, 100);
    const Embedder e = train_autoencoder(ds, small_config());
    const Vector x = ds.features.row(5).transpose();
    EXPECT_EQ(e.embed(x, ds.labels[5]), e.embed(x, ds.labels[5]));
    EXPECT_EQ(e.embed(x, ds.labels[5]), e.embed(ds).row(5).transpose());
}

TEST(Autoencoder, LambdaOneEqualsFeaturesOnlyAutoencoder) {
    const Dataset ds = binary_set(3, 150);
    const AutoencoderConfig cfg = small_config(1.0);
    const AutoencoderFit fit = fit_autoencoder(ds, cfg);

    // Same network trained on the feature term alone.
    MlpArchitecture arch;
    arch.layer_sizes = {4, 4, 2, 4, 4};
    arch.output_kind = OutputKind::logits;
    Matrix targets(ds.size(), 4);
    targets.leftCols(3) = ds.features;
    targets.col(3) = label_targets(ds.labels, LossKind::hinge).col(0);
    const Matrix inputs = autoencoder_inputs(ds.features, ds.labels, ds.label_kind, 2);
    const ModelParams net = train(init_params(arch, derive_seed(cfg.train.seed, {0})), inputs, targets,
                                  Vector::Ones(ds.size()), Objective{LossTerm{LossKind::squared, 0, 3, 0, 1.0}},
                                  cfg.train);
    EXPECT_EQ(fit.network.flatten(), net.flatten());
}

TEST(Autoencoder, SufficientCapacityReconstructsFivePoints) {
    Dataset ds;
    ds.features = Matrix{{0.1, -0.4}, {0.8, 0.2}, {-0.6, 0.5}, {0.3, 0.9}, {-0.2, -0.7}};
    ds.labels = Vector{{0.5, -0.3, 0.2, 0.9, -0.8}};
    ds.label_kind = LabelKind::regression;
    AutoencoderConfig cfg;
    cfg.hidden = {};
    cfg.dim = 3;
    cfg.train.steps = 20000;
    cfg.train.learning_rate = 0.01;
    cfg.train.seed = 1;
    const AutoencoderFit fit = fit_autoencoder(ds, cfg);
    const Matrix rec = reconstruct(fit.network, ds.features, ds.labels, ds.label_kind, 0);
    const Matrix in = autoencoder_inputs(ds.features, ds.labels, ds.label_kind, 0);
    EXPECT_LT((rec - in).squaredNorm() / static_cast<double>(in.size()), 1e-2);
}

TEST(Autoencoder, LabelOnlyObjectiveDoesNotBeatFeatureObjectiveOnFeatures) {
    // x and y independent: y carries nothing about x.
    Rng rng(4);
    std::normal_distribution<double> nd(0.0, 1.0);
    Dataset ds;
    ds.features.resize(200, 3);
    ds.labels.resize(200);
    for (Eigen::Index i = 0; i < 200; ++i) {
        for (int j = 0; j < 3; ++j) ds.features(i, j) = nd(rng);
        ds.labels[i] = nd(rng) > 0 ? 1.0 : 0.0;
    }
    ds.label_kind = LabelKind::binary;
    ds.num_classes = 2;
    const double label_only = fit_autoencoder(ds, small_config(0.0)).feature_loss;
    const double feature_only = fit_autoencoder(ds, small_config(1.0)).feature_loss;
    EXPECT_GE(label_only, feature_only);
}

TEST(Autoencoder, InvalidConfigRejected) {
    AutoencoderConfig c = small_config();
    c.lambda = 1.5;
    EXPECT_THROW(c.validate(), ContractError);
    c = small_config();
    c.dim = 0;
    EXPECT_THROW(c.validate(), ContractError);
}

TEST(Passthrough, BalancedBinary) {
    Dataset ds;
    ds.features = Matrix::Zero(4, 1);
    ds.labels = Vector{{0, 1, 0, 1}};
    ds.label_kind = LabelKind::binary;
    ds.num_classes = 2;
    const Embedder e = label_passthrough_embedder(ds);
    EXPECT_EQ(e.embed(Vector::Zero(1), 1.0), (Vector{{-0.5, 0.5}}));
}

TEST(Passthrough, TenClassesOneHotMinusFrequencies) {
    Dataset ds;
    ds.features = Matrix::Zero(20, 1);
    ds.labels.resize(20);
    for (int i = 0; i < 20; ++i) ds.labels[i] = i < 11 ? i % 10 : (i % 3);
    ds.label_kind = LabelKind::multiclass;
    ds.num_classes = 10;
    const Embedder e = label_passthrough_embedder(ds);
    Vector freq = Vector::Zero(10);
    for (double y : ds.labels) freq[static_cast<Eigen::Index>(y)] += 1.0 / 20.0;
    Vector expected = -freq;
    expected[3] += 1.0;
    EXPECT_LT((e.embed(Vector::Zero(1), 3.0) - expected).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT(e.embed(ds).colwise().sum().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Passthrough, RegressionRejected) {
    Dataset ds;
    ds.features = Matrix::Zero(2, 1);
    ds.labels = Vector{{0.3, 0.1}};
    EXPECT_THROW(label_passthrough_embedder(ds), ContractError);
}
