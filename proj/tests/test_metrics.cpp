#include "moew/errors.hpp"
#include "moew/metrics.hpp"
#include "moew/random.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

using namespace moew;

namespace {

EvalBundle bundle(Vector scores, Vector labels) {
    EvalBundle b;
    b.scores = std::move(scores);
    b.labels = std::move(labels);
    return b;
}

// Random bundle with ties: scores drawn from a small grid.
EvalBundle random_binary(Rng& rng, int n, int groups = 1) {
    std::uniform_int_distribution<int> grid(0, 12), coin(0, 1), grp(0, groups - 1);
    EvalBundle b;
    b.scores.resize(n);
    b.labels.resize(n);
    std::vector<int> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        b.scores[i] = grid(rng) / 4.0 - 1.0;
        b.labels[i] = coin(rng);
        g[static_cast<std::size_t>(i)] = grp(rng);
    }
    b.labels[0] = 1;
    // Every group gets a negative.
    for (int k = 0; k < groups && k + 1 < n; ++k) {
        g[static_cast<std::size_t>(k + 1)] = k;
        b.labels[k + 1] = 0;
    }
    if (groups > 1) b.groups = g;
    return b;
}

std::vector<double> candidate_thresholds(const Vector& s) {
    std::set<double> u(s.data(), s.data() + s.size());
    std::vector<double> t(u.begin(), u.end());
    t.insert(t.begin(), *u.begin() - 1.0);
    return t;  // ascending, first is below everything
}

double oracle_precision_at_recall(const EvalBundle& b, double target) {
    double pos = 0;
    for (double y : b.labels) pos += y > 0.5;
    // Largest cutoff c with recall(score >= c) >= target.
    auto cuts = candidate_thresholds(b.scores);
    for (auto it = cuts.rbegin(); it != cuts.rend(); ++it) {
        double tp = 0, fp = 0;
        for (Eigen::Index i = 0; i < b.size(); ++i)
            if (b.scores[i] >= *it) (b.labels[i] > 0.5 ? tp : fp) += 1;
        if (tp / pos >= target - 1e-12) return tp / (tp + fp);
    }
    return std::nan("");
}

double oracle_fpr_gap(const EvalBundle& b, const std::vector<double>& th) {
    std::map<int, std::pair<double, double>> per;  // group -> (fp, neg)
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        const int g = b.groups ? (*b.groups)[static_cast<std::size_t>(i)] : 0;
        const double t = th.size() == 1 ? th[0] : th[static_cast<std::size_t>(g)];
        if (b.labels[i] < 0.5) {
            per[g].second += 1;
            if (b.scores[i] > t) per[g].first += 1;
        }
    }
    double lo = 1, hi = 0;
    for (auto& [g, c] : per) {
        lo = std::min(lo, c.first / c.second);
        hi = std::max(hi, c.first / c.second);
    }
    return hi - lo;
}

long flagged_count(const Vector& s, double t) { return (s.array() > t).count(); }

double accuracy_of(const EvalBundle& b, double t) {
    double ok = 0;
    for (Eigen::Index i = 0; i < b.size(); ++i) ok += (b.scores[i] > t) == (b.labels[i] > 0.5);
    return ok / static_cast<double>(b.size());
}

// Scalar std::exp: Eigen's packet exp can round equal inputs differently by position.
Vector warp(const Vector& s) {
    return s.unaryExpr([](double x) { return std::exp(3.0 * x) + 0.5 * x; });
}

EvalBundle warped(EvalBundle b) {
    b.scores = warp(b.scores);
    return b;
}

} // namespace

// ---------------------------------------------------------------------------
// precision at recall
// ---------------------------------------------------------------------------

TEST(PrecisionAtRecall, FullRecall) {
    const auto b = bundle(Vector{{0.9, 0.8, 0.7, 0.6}}, Vector{{1, 1, 0, 1}});
    EXPECT_DOUBLE_EQ(precision_at_recall(b, 1.0), 0.75);
    EXPECT_LE(precision_at_recall_cutoff(b, 1.0), 0.6);
}

TEST(PrecisionAtRecall, HalfRecall) {
    const auto b = bundle(Vector{{0.9, 0.8, 0.7, 0.6}}, Vector{{1, 1, 0, 1}});
    EXPECT_DOUBLE_EQ(precision_at_recall(b, 0.5), 1.0);
    EXPECT_EQ(precision_at_recall_cutoff(b, 0.5), 0.8);
}

TEST(PrecisionAtRecall, PerfectSeparation) {
    const auto b = bundle(Vector{{0.9, 0.8, 0.2, 0.1}}, Vector{{1, 1, 0, 0}});
    for (double t : {0.1, 0.5, 0.95, 1.0}) EXPECT_EQ(precision_at_recall(b, t), 1.0);
}

TEST(PrecisionAtRecall, NoPositivesIsError) {
    EXPECT_THROW(precision_at_recall(bundle(Vector{{0.1, 0.2}}, Vector{{0, 0}}), 0.5), MetricError);
}

TEST(PrecisionAtRecall, MatchesBruteForce) {
    Rng rng(11);
    std::uniform_int_distribution<int> size(1, 50);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const auto b = random_binary(rng, size(rng));
        const double target = trial % 5 == 0 ? 1.0 : u(rng);
        EXPECT_NEAR(precision_at_recall(b, target), oracle_precision_at_recall(b, target), 1e-12);
    }
}

// ---------------------------------------------------------------------------
// max per class error
// ---------------------------------------------------------------------------

TEST(MaxPerClassError, AllCorrect) {
    EXPECT_EQ(max_per_class_error(bundle(Vector{{0, 1, 2}}, Vector{{0, 1, 2}}), 3), 0.0);
}

TEST(MaxPerClassError, TwoClassCounts) {
    Vector y(20), p(20);
    for (int i = 0; i < 20; ++i) {
        y[i] = i < 10 ? 0 : 1;
        p[i] = y[i];
    }
    p[0] = 1;                 // class 0: 1/10 wrong
    p[10] = p[11] = p[12] = 0; // class 1: 3/10 wrong
    EXPECT_DOUBLE_EQ(max_per_class_error(bundle(p, y), 2), 0.3);
}

TEST(MaxPerClassError, SingleClassHalfWrong) {
    EXPECT_DOUBLE_EQ(max_per_class_error(bundle(Vector{{0, 1, 0, 2}}, Vector{{0, 0, 0, 0}}), 1), 0.5);
}

TEST(MaxPerClassError, AbsentClassIsError) {
    EXPECT_THROW(max_per_class_error(bundle(Vector{{0, 1}}, Vector{{0, 0}}), 2), MetricError);
}

TEST(MaxPerClassError, MatchesDirectCount) {
    Rng rng(12);
    std::uniform_int_distribution<int> cls(0, 3), size(4, 50);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = size(rng);
        Vector y(n), p(n);
        for (int i = 0; i < n; ++i) {
            y[i] = i < 4 ? i : cls(rng);
            p[i] = cls(rng);
        }
        double worst = 0;
        for (int c = 0; c < 4; ++c) {
            long tot = 0, bad = 0;
            for (int i = 0; i < n; ++i)
                if (y[i] == c) {
                    ++tot;
                    bad += p[i] != c;
                }
            worst = std::max(worst, static_cast<double>(bad) / static_cast<double>(tot));
        }
        EXPECT_NEAR(max_per_class_error(bundle(p, y), 4), worst, 1e-12);
    }
}

// ---------------------------------------------------------------------------
// worst quartile relative error
// ---------------------------------------------------------------------------

TEST(WorstQuartile, ExactPredictionsGiveZero) {
    const Vector y{{10, 20, 30, 50}};
    EXPECT_EQ(worst_quartile_relative_error(bundle(y, y), {17, 25, 42}), 0.0);
}

TEST(WorstQuartile, HandBucketing) {
    EXPECT_NEAR(worst_quartile_relative_error(bundle(Vector{{11, 20, 30, 50}}, Vector{{10, 20, 30, 50}}), {17, 25, 42}),
                0.1, 1e-12);
}

TEST(WorstQuartile, EmptyBucketIsError) {
    EXPECT_THROW(worst_quartile_relative_error(bundle(Vector{{10, 20, 30}}, Vector{{10, 20, 30}}), {17, 25, 42}),
                 MetricError);
}

TEST(WorstQuartile, MatchesDirectComputation) {
    Rng rng(13);
    std::uniform_real_distribution<double> price(5.0, 80.0), noise(0.5, 1.5);
    for (int trial = 0; trial < 100; ++trial) {
        Vector y(40), p(40);
        for (int i = 0; i < 40; ++i) {
            y[i] = i < 4 ? std::array<double, 4>{10, 20, 30, 50}[i] : price(rng);
            p[i] = y[i] * noise(rng);
        }
        double worst = 0;
        const double lo[4] = {-1e300, 17, 25, 42}, hi[4] = {17, 25, 42, 1e300};
        for (int q = 0; q < 4; ++q) {
            double s = 0, c = 0;
            for (int i = 0; i < 40; ++i)
                if (y[i] >= lo[q] && y[i] < hi[q]) {
                    s += std::abs(p[i] / y[i] - 1);
                    c += 1;
                }
            worst = std::max(worst, s / c);
        }
        EXPECT_NEAR(worst_quartile_relative_error(bundle(p, y), {17, 25, 42}), worst, 1e-12);
    }
}

// ---------------------------------------------------------------------------
// fairness
// ---------------------------------------------------------------------------

TEST(FprGap, SingleGroupIsZero) {
    EXPECT_EQ(fairness_violation_fpr_gap(bundle(Vector{{0.1, 0.9, 0.5}}, Vector{{0, 0, 1}}), {0.4}), 0.0);
}

TEST(FprGap, TwoGroupCounts) {
    // Group 0: 20 negatives, 4 flagged. Group 1: 20 negatives, 1 flagged.
    Vector s = Vector::Zero(40), y = Vector::Zero(40);
    std::vector<int> g(40);
    for (int i = 0; i < 40; ++i) g[static_cast<std::size_t>(i)] = i < 20 ? 0 : 1;
    for (int i : {0, 1, 2, 3, 20}) s[i] = 1.0;
    auto b = bundle(s, y);
    b.groups = g;
    EXPECT_NEAR(fairness_violation_fpr_gap(b, {0.5}), 0.15, 1e-15);
}

TEST(FprGap, IdenticalGroupsGiveZero) {
    auto b = bundle(Vector{{0.1, 0.7, 0.4, 0.1, 0.7, 0.4}}, Vector{{0, 0, 1, 0, 0, 1}});
    b.groups = std::vector<int>{0, 0, 0, 1, 1, 1};
    EXPECT_EQ(fairness_violation_fpr_gap(b, {0.3}), 0.0);
}

TEST(FprGap, GroupWithoutNegativesIsError) {
    auto b = bundle(Vector{{0.1, 0.7}}, Vector{{0, 1}});
    b.groups = std::vector<int>{0, 1};
    EXPECT_THROW(fairness_violation_fpr_gap(b, {0.3}), MetricError);
}

TEST(FprGap, MatchesDirectCount) {
    Rng rng(14);
    std::uniform_int_distribution<int> size(4, 50);
    std::uniform_real_distribution<double> u(-1.2, 2.2);
    for (int trial = 0; trial < 200; ++trial) {
        const auto b = random_binary(rng, size(rng), 3);
        const std::vector<double> shared{u(rng)}, per{u(rng), u(rng), u(rng)};
        EXPECT_NEAR(fairness_violation_fpr_gap(b, shared), oracle_fpr_gap(b, shared), 1e-12);
        EXPECT_NEAR(fairness_violation_fpr_gap(b, per), oracle_fpr_gap(b, per), 1e-12);
    }
}

// ---------------------------------------------------------------------------
// coverage thresholds
// ---------------------------------------------------------------------------

TEST(CoverageThreshold, FivePercentOfHundred) {
    Vector s(100);
    for (int i = 0; i < 100; ++i) s[i] = std::sin(i * 1.7) + i * 1e-3;
    EXPECT_EQ(flagged_count(s, threshold_at_coverage(s, 0.05)), 5);
}

TEST(CoverageThreshold, FullCoverageFlagsAll) {
    const Vector s{{0.3, -2.0, 5.0}};
    const double t = threshold_at_coverage(s, 1.0);
    EXPECT_LT(t, -2.0);
    EXPECT_EQ(flagged_count(s, t), 3);
}

TEST(CoverageThreshold, AllEqualFlagsNone) {
    const Vector s = Vector::Constant(10, 0.4);
    EXPECT_EQ(flagged_count(s, threshold_at_coverage(s, 0.5)), 0);
}

TEST(CoverageThreshold, SmallestQualifyingThreshold) {
    Rng rng(15);
    std::uniform_int_distribution<int> size(1, 50), grid(0, 8);
    std::uniform_real_distribution<double> cov(0.01, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = size(rng);
        Vector s(n);
        for (int i = 0; i < n; ++i) s[i] = grid(rng);
        const double c = cov(rng);
        const double limit = std::floor(c * n + 1e-9);
        double expect = std::numeric_limits<double>::quiet_NaN();
        for (double t : candidate_thresholds(s))
            if (flagged_count(s, t) <= limit) {
                expect = t;
                break;
            }
        const double got = threshold_at_coverage(s, c);
        EXPECT_EQ(flagged_count(s, got), flagged_count(s, expect));
        if (expect >= s.minCoeff()) EXPECT_EQ(got, expect);
        else EXPECT_LT(got, s.minCoeff());
    }
}

TEST(AccuracyThreshold, MatchesExhaustiveSearch) {
    Rng rng(16);
    std::uniform_int_distribution<int> size(1, 50);
    for (int trial = 0; trial < 300; ++trial) {
        const auto b = random_binary(rng, size(rng));
        double best = -1;
        for (double t : candidate_thresholds(b.scores)) best = std::max(best, accuracy_of(b, t));
        EXPECT_NEAR(accuracy_of(b, accuracy_maximizing_threshold(b)), best, 1e-12);
    }
}

// ---------------------------------------------------------------------------
// post-shift
// ---------------------------------------------------------------------------

TEST(PostShift, TwoGroupsOneFlagEach) {
    auto b = bundle(Vector{{0.1, 0.9, 0.2, 0.8}}, Vector{{0, 0, 0, 0}});
    b.groups = std::vector<int>{0, 0, 1, 1};
    const PostShift ps = post_shift_thresholds(b, 0.5);
    EXPECT_DOUBLE_EQ(ps.coverage, 0.5);
    // Exhaustive: each group's FPR under its chosen threshold.
    for (int g = 0; g < 2; ++g) {
        double fp = 0;
        for (int i = 0; i < 4; ++i)
            if ((*b.groups)[static_cast<std::size_t>(i)] == g && b.scores[i] > ps.thresholds[static_cast<std::size_t>(g)])
                fp += 1;
        EXPECT_EQ(fp / 2.0, 0.5);
    }
}

TEST(PostShift, SingleGroupMatchesCoverageThreshold) {
    Vector s(30), y = Vector::Zero(30);
    for (int i = 0; i < 30; ++i) s[i] = std::cos(i * 2.3) + i * 1e-4;
    auto b = bundle(s, y);
    for (double c : {0.1, 0.3, 0.5, 0.9}) {
        const PostShift ps = post_shift_thresholds(b, c);
        EXPECT_EQ(flagged_count(s, ps.thresholds[0]), flagged_count(s, threshold_at_coverage(s, c)));
    }
}

TEST(PostShift, IdenticalGroupsIdenticalThresholds) {
    auto b = bundle(Vector{{0.1, 0.5, 0.7, 0.3, 0.1, 0.5, 0.7, 0.3}}, Vector{{0, 0, 1, 0, 0, 0, 1, 0}});
    b.groups = std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1};
    for (double c : {0.25, 0.5, 0.75}) {
        const PostShift ps = post_shift_thresholds(b, c);
        EXPECT_EQ(ps.thresholds[0], ps.thresholds[1]);
    }
}

TEST(PostShift, CoverageWithinOneExample) {
    Rng rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> grp(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        EvalBundle b;
        b.scores.resize(40);
        b.labels = Vector::Zero(40);
        std::vector<int> g(40);
        for (int i = 0; i < 40; ++i) {
            b.scores[i] = u(rng);
            g[static_cast<std::size_t>(i)] = i < 2 ? i : grp(rng);
        }
        b.groups = g;
        const double c = 0.1 + 0.8 * u(rng);
        EXPECT_LE(std::abs(post_shift_thresholds(b, c).coverage - c), 1.0 / 40 + 1e-12);
    }
}

// ---------------------------------------------------------------------------
// aux
// ---------------------------------------------------------------------------

TEST(MeanAux, AllOnes) {
    auto b = bundle(Vector{{0.1, 0.5, 0.9, 0.3}}, Vector::Zero(4));
    b.aux_scores = Vector::Ones(4);
    EXPECT_EQ(mean_aux_of_flagged(b, 0.5), 1.0);
}

TEST(MeanAux, TopOneSelected) {
    auto b = bundle(Vector{{0.8, 0.2}}, Vector::Zero(2));
    b.aux_scores = Vector{{0.9, 0.1}};
    EXPECT_EQ(mean_aux_of_flagged(b, 0.5), 0.9);
}

TEST(MeanAux, FullCoverageIsOverallMean) {
    auto b = bundle(Vector{{0.8, 0.2, 0.5}}, Vector::Zero(3));
    b.aux_scores = Vector{{0.9, 0.1, 0.2}};
    EXPECT_NEAR(mean_aux_of_flagged(b, 1.0), 0.4, 1e-15);
}

TEST(MeanAux, ZeroFlaggedIsError) {
    auto b = bundle(Vector::Constant(4, 0.5), Vector::Zero(4));
    b.aux_scores = Vector::Ones(4);
    EXPECT_THROW(mean_aux_of_flagged(b, 0.5), MetricError);
}

// ---------------------------------------------------------------------------
// registry and properties
// ---------------------------------------------------------------------------

TEST(Registry, OrientationNegatesOnce) {
    auto b = bundle(Vector{{11, 20, 30, 50}}, Vector{{10, 20, 30, 50}});
    const MetricSpec wq{"worst_quartile_relative_error", {{"t0", 17}, {"t1", 25}, {"t2", 42}}};
    EXPECT_NEAR(evaluate_metric_raw(wq, b), 0.1, 1e-12);
    EXPECT_EQ(evaluate_metric(wq, b), -evaluate_metric_raw(wq, b));
    const auto p = bundle(Vector{{0.9, 0.8, 0.7, 0.6}}, Vector{{1, 1, 0, 1}});
    const MetricSpec pr{"precision_at_recall", {{"target_recall", 1.0}}};
    EXPECT_EQ(evaluate_metric(pr, p), evaluate_metric_raw(pr, p));
    for (const auto& info : metric_registry()) {
        const bool lower_better = info.name.find("error") != std::string::npos ||
                                  info.name.find("violation") != std::string::npos;
        EXPECT_EQ(info.orientation == Orientation::minimize, lower_better) << info.name;
    }
}

TEST(Registry, ConfigErrorsNameTheKey) {
    auto key_of = [](const MetricSpec& s) {
        try {
            validate_metric_spec(s);
        } catch (const ConfigError& e) {
            return e.key();
        }
        return std::string("none");
    };
    EXPECT_EQ(key_of({"", {}}), "metric.name");
    EXPECT_EQ(key_of({"nope", {}}), "metric.name");
    EXPECT_EQ(key_of({"precision_at_recall", {}}), "metric.params.target_recall");
    EXPECT_EQ(key_of({"accuracy", {{"bogus", 1}}}), "metric.params.bogus");
    EXPECT_EQ(key_of({"mean_aux_of_flagged", {{"coverage", 0.05}}}), "none");
}

TEST(Registry, TrainBundleRequiredForThresholdedMetrics) {
    Rng rng(3);
    auto b = random_binary(rng, 20);
    EXPECT_THROW(evaluate_metric({"accuracy", {}}, b), MetricError);
    EXPECT_NO_THROW(evaluate_metric({"accuracy", {}}, b, &b));
}

TEST(Properties, InvariantUnderIncreasingScoreTransforms) {
    Rng rng(18);
    std::uniform_int_distribution<int> size(6, 50);
    const std::vector<MetricSpec> specs = {
        {"precision_at_recall", {{"target_recall", 0.7}}},
        {"fairness_violation", {}},
        {"accuracy", {}},
        {"post_shift_accuracy", {{"coverage", 0.3}}},
        {"post_shift_fairness_violation", {}},
        {"mean_aux_of_flagged", {{"coverage", 0.5}}},
    };
    for (int trial = 0; trial < 100; ++trial) {
        auto val = random_binary(rng, size(rng), 2);
        auto tr = random_binary(rng, size(rng), 2);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        val.aux_scores = Vector(val.size());
        for (auto& a : *val.aux_scores) a = u(rng);
        const auto wv = warped(val), wt = warped(tr);
        for (const auto& s : specs) {
            double a = 0, w = 0;
            try {
                a = evaluate_metric(s, val, &tr);
            } catch (const MetricError&) {
                EXPECT_THROW(evaluate_metric(s, wv, &wt), MetricError) << s.name;
                continue;
            }
            w = evaluate_metric(s, wv, &wt);
            EXPECT_NEAR(a, w, 1e-12) << s.name;
        }
        const double c = 0.2 + 0.6 * u(rng);
        EXPECT_EQ(flagged_count(val.scores, threshold_at_coverage(val.scores, c)),
                  flagged_count(wv.scores, threshold_at_coverage(wv.scores, c)));
    }
}
