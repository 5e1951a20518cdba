#include "helpers.hpp"

#include "moew/driver.hpp"
#include "moew/errors.hpp"
#include "moew/random.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace moew;

namespace {

ExperimentConfig small_toy() {
    ExperimentConfig cfg;
    ToySpec toy;
    toy.n_train = 300;
    toy.n_val = 150;
    toy.n_test = 300;
    cfg.data.source = toy;
    cfg.metric = {"precision_at_recall", {{"target_recall", 0.95}}};
    cfg.model_hidden = {5};
    cfg.model_train.steps = 150;
    cfg.embedding.autoencoder.hidden = {4};
    cfg.embedding.autoencoder.dim = 2;
    cfg.embedding.autoencoder.train.steps = 150;
    cfg.batches = 2;
    cfg.bucb.batch_size = 3;
    cfg.bucb.acquisition_samples = 500;
    cfg.noise_seeds = 3;
    cfg.seed = 42;
    return cfg;
}

void expect_same_records(const std::vector<RunRecord>& a, const std::vector<RunRecord>& b) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].method, b[i].method);
        EXPECT_EQ(a[i].repeat, b[i].repeat);
        EXPECT_EQ(a[i].batch, b[i].batch);
        EXPECT_EQ(a[i].candidate, b[i].candidate);
        EXPECT_EQ(a[i].alpha, b[i].alpha);
        EXPECT_EQ(a[i].val_metric, b[i].val_metric);
        EXPECT_EQ(a[i].test_metric, b[i].test_metric);
    }
}

} // namespace

TEST(Moew, SelectionIsMaxOfOwnRecords) {
    const auto cfg = small_toy();
    const auto ctx = prepare_repeat(cfg, 0);
    const MethodResult r = run_moew(cfg, ctx);
    ASSERT_EQ(r.records.size(), 6u);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < r.records.size(); ++i)
        if (r.records[i].val_metric > r.records[arg].val_metric) arg = i;
    EXPECT_EQ(r.best.batch, r.records[arg].batch);
    EXPECT_EQ(r.best.candidate, r.records[arg].candidate);
    EXPECT_EQ(r.best.val_metric, r.records[arg].val_metric);
    EXPECT_EQ(r.best.test_metric, r.records[arg].test_metric);
    EXPECT_EQ(select_best(r.records), arg);
}

TEST(Moew, FirstCandidateIsOriginAndBestDominatesIt) {
    const auto cfg = small_toy();
    const auto ctx = prepare_repeat(cfg, 0);
    const MethodResult r = run_moew(cfg, ctx);
    EXPECT_EQ(r.records[0].batch, 0);
    EXPECT_EQ(r.records[0].candidate, 0);
    EXPECT_TRUE(r.records[0].alpha.isZero());
    EXPECT_GE(r.best.val_metric, r.records[0].val_metric);
    for (const auto& rec : r.records) {
        EXPECT_LE(rec.alpha.norm(), cfg.bucb.radius + 1e-12);
        EXPECT_TRUE(std::isfinite(rec.val_metric));
        EXPECT_TRUE(std::isfinite(rec.test_metric));
    }
    EXPECT_GE(r.noise_variance, 0.0);
}

TEST(Moew, ReproducibleBitwise) {
    const auto cfg = small_toy();
    const MethodResult a = run_moew(cfg, 0), b = run_moew(cfg, 0);
    expect_same_records(a.records, b.records);
    EXPECT_EQ(a.best_params.flatten(), b.best_params.flatten());
}

TEST(Moew, ConcurrentEqualsSequential) {
    auto cfg = small_toy();
    cfg.generator = GeneratorKind::random;
    cfg.bucb.batch_size = 4;
    const MethodResult seq = run_moew(cfg, 0);
    cfg.jobs = 3;
    const MethodResult par = run_moew(cfg, 0);
    expect_same_records(seq.records, par.records);
    EXPECT_EQ(seq.best_params.flatten(), par.best_params.flatten());
}

TEST(Moew, SingleOriginCandidateEqualsImportanceWeighting) {
    auto cfg = small_toy();
    cfg.generator = GeneratorKind::random;
    cfg.batches = 1;
    cfg.bucb.batch_size = 1;
    const auto ctx = prepare_repeat(cfg, 0);
    const MethodResult r = run_moew(cfg, ctx);
    ASSERT_EQ(r.records.size(), 1u);
    const Vector w = baseline_weights(ctx.model_data.train, ImportanceWeighting{ctx.importance});
    EXPECT_EQ(r.best_weights.values, w);
    const CandidateScore s = train_and_score(cfg, ctx, w, candidate_seed(cfg.seed, 0, 0, 0));
    EXPECT_EQ(s.val_metric, r.best.val_metric);
    EXPECT_EQ(s.test_metric, r.best.test_metric);
    EXPECT_EQ(s.params.flatten(), r.best_params.flatten());
}

TEST(Moew, GridEvaluatesEveryCoverPoint) {
    auto cfg = small_toy();
    cfg.generator = GeneratorKind::grid;
    cfg.grid_epsilon = 1.0;
    cfg.embedding.autoencoder.dim = 1;
    const auto ctx = prepare_repeat(cfg, 0);
    const MethodResult r = run_moew(cfg, ctx);
    ASSERT_EQ(r.records.size(), 3u);
    EXPECT_TRUE(r.records[0].alpha.isZero());
    EXPECT_EQ(std::abs(r.records[1].alpha[0]), cfg.bucb.radius);
}

TEST(Moew, DivergenceScoresMinusInfinity) {
    auto cfg = small_toy();
    cfg.model_train.learning_rate = 1e300;
    const auto ctx = prepare_repeat(cfg, 0);
    // Huge weights times huge losses overflow the weighted loss.
    const CandidateScore s = train_and_score(cfg, ctx, Vector::Constant(ctx.model_data.train.size(), 1e300), 1);
    EXPECT_TRUE(s.diverged);
    EXPECT_EQ(s.val_metric, -std::numeric_limits<double>::infinity());
    EXPECT_EQ(s.test_metric, -std::numeric_limits<double>::infinity());
}

TEST(Moew, AllDivergedBatchIsRunError) {
    moew::testing::TempDir dir;
    std::string csv = "x,y\n";
    for (int i = 0; i < 40; ++i) csv += std::to_string(i * 0.1) + "," + std::to_string(1 + i % 7) + "\n";
    dir.write("d.csv", csv);
    ExperimentConfig cfg;
    CsvSource src;
    src.train = src.validation = src.test = dir / "d.csv";
    src.schema.columns = {{"x", ColumnRole::feature}, {"y", ColumnRole::label}};
    cfg.data.source = src;
    cfg.metric = {"worst_quartile_relative_error", {{"t0", 2}, {"t1", 4}, {"t2", 6}}};
    cfg.model_hidden = {3};
    cfg.model_train.steps = 5;
    cfg.embedding.autoencoder.train.steps = 5;
    cfg.importance = ImportanceKind::histogram;
    cfg.generator = GeneratorKind::random;
    cfg.batches = 1;
    cfg.bucb.batch_size = 2;
    RepeatContext ctx = prepare_repeat(cfg, 0);
    // Squared loss on these labels overflows at the first step of every training.
    ctx.model_data.train.labels *= 1e200;
    EXPECT_THROW(run_moew(cfg, ctx), RunError);
}

TEST(Baseline, UniformSingleRunIsDeterministic) {
    auto cfg = small_toy();
    const auto ctx = prepare_repeat(cfg, 0);
    const BaselineSpec spec{BaselineMethod::uniform, 1, {}};
    const MethodResult a = run_baseline(cfg, ctx, spec), b = run_baseline(cfg, ctx, spec);
    expect_same_records(a.records, b.records);
    EXPECT_EQ(a.records[0].method, "uniform");
    EXPECT_EQ(a.records[0].alpha.size(), 0);
}

TEST(Baseline, BestOfNNondecreasingOnNestedSeeds) {
    auto cfg = small_toy();
    const auto ctx = prepare_repeat(cfg, 0);
    double prev = -std::numeric_limits<double>::infinity();
    std::vector<RunRecord> longest;
    for (long n : {1, 2, 4}) {
        const MethodResult r = run_baseline(cfg, ctx, {BaselineMethod::random, n, {}});
        ASSERT_EQ(r.records.size(), static_cast<std::size_t>(n));
        EXPECT_GE(r.best.val_metric, prev);
        prev = r.best.val_metric;
        longest = r.records;
    }
    const MethodResult two = run_baseline(cfg, ctx, {BaselineMethod::random, 2, {}});
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(two.records[i].val_metric, longest[i].val_metric);
}

TEST(Baseline, DensityRatioUsesAnalyticRatios) {
    auto cfg = small_toy();
    const auto ctx = prepare_repeat(cfg, 0);
    ASSERT_TRUE(ctx.density_ratio.has_value());
    const ToySpec toy = std::get<ToySpec>(cfg.data.source);
    SplitData raw = generate_toy([&] {
        ToySpec t = toy;
        t.seed = derive_seed(cfg.seed, {0, static_cast<std::uint64_t>(SeedStage::data)});
        return t;
    }());
    for (Eigen::Index i = 0; i < 5; ++i)
        EXPECT_DOUBLE_EQ((*ctx.density_ratio)[i],
                         toy_density_ratio(toy, raw.train.features(i, 0), raw.train.features(i, 1)));
}

TEST(Repeats, SummaryOfSelectedTestMetrics) {
    auto cfg = small_toy();
    cfg.repeats = 2;
    cfg.batches = 1;
    cfg.bucb.batch_size = 2;
    cfg.baselines = {{BaselineMethod::uniform, 2, {}}};
    int calls = 0;
    const ExperimentResult res = run_repeats(cfg, [&](const RepeatContext&, const std::string&, const MethodResult&) {
        ++calls;
    });
    EXPECT_EQ(calls, 4);
    ASSERT_EQ(res.selected.at("moew").size(), 2u);
    std::vector<double> t;
    for (const auto& r : res.selected.at("uniform")) t.push_back(r.test_metric);
    const Summary s = summarize(t);
    EXPECT_EQ(res.summary.at("uniform").mean, s.mean);
    EXPECT_EQ(res.summary.at("uniform").margin, s.margin);
    EXPECT_EQ(res.records.size(), 2u * (2 + 2));
}

TEST(Repeats, SingleRepeatRejected) {
    auto cfg = small_toy();
    cfg.repeats = 1;
    EXPECT_THROW(run_repeats(cfg), ContractError);
}

TEST(Stats, HandComputedMargin) {
    const Summary s = summarize({1.0, 2.0, 3.0});
    EXPECT_DOUBLE_EQ(s.mean, 2.0);
    EXPECT_DOUBLE_EQ(s.sd, 1.0);
    EXPECT_NEAR(s.margin, 1.96 / std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(s.margin, 1.1316, 1e-4);
}

TEST(Stats, IdenticalValuesZeroMargin) {
    EXPECT_EQ(summarize({0.4, 0.4, 0.4, 0.4}).margin, 0.0);
    EXPECT_THROW(summarize({1.0}), ContractError);
}

TEST(Stats, PearsonSignsAndErrors) {
    EXPECT_NEAR(pearson({1, 2, 3, 4}, {2, 4, 6, 8}), 1.0, 1e-15);
    EXPECT_NEAR(pearson({1, 2, 3, 4}, {8, 6, 4, 2}), -1.0, 1e-15);
    EXPECT_THROW(pearson({1, 1, 1}, {1, 2, 3}), ContractError);
    EXPECT_THROW(pearson({1, 2}, {1, 2, 3}), ContractError);
}

TEST(Config, ValidationNamesKeys) {
    auto key_of = [](const ExperimentConfig& c) {
        try {
            c.validate();
        } catch (const ConfigError& e) {
            return e.key();
        }
        return std::string("none");
    };
    auto cfg = small_toy();
    EXPECT_EQ(key_of(cfg), "none");
    cfg.batches = 0;
    EXPECT_EQ(key_of(cfg), "search.batches");
    cfg = small_toy();
    cfg.baselines = {{BaselineMethod::uniform, 0, {}}};
    EXPECT_EQ(key_of(cfg), "baselines[0].budget");
    cfg = small_toy();
    cfg.metric.name.clear();
    EXPECT_EQ(key_of(cfg), "metric.name");
}
