#pragma once

#include "moew/data.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace moew {

/// Model outputs aligned with evaluation labels. For multiclass models `scores`
/// holds the argmax class index.
struct EvalBundle {
    Vector scores;
    Vector labels;
    std::optional<std::vector<int>> groups;
    std::optional<Vector> aux_scores;

    Eigen::Index size() const { return scores.size(); }
    void validate() const;
};

// Every flagging decision below uses strict inequality: flagged = {score > t}.

/// Precision at the largest threshold whose recall reaches `target_recall`.
double precision_at_recall(const EvalBundle& b, double target_recall);

/// Lowest score still flagged by precision_at_recall's threshold.
double precision_at_recall_cutoff(const EvalBundle& b, double target_recall);

/// max over classes of Pr(prediction != c | label = c). Lower is better.
double max_per_class_error(const EvalBundle& b, int num_classes);

/// Labels bucketed as (-inf, t0), [t0, t1), [t1, t2), [t2, inf); returns the largest
/// bucket mean of |prediction / label - 1|. Lower is better.
double worst_quartile_relative_error(const EvalBundle& b, const std::array<double, 3>& thresholds);

/// max_g FPR_g - min_g FPR_g. `thresholds` holds either one shared value or one per group id.
double fairness_violation_fpr_gap(const EvalBundle& b, const std::vector<double>& thresholds);

/// Smallest t with fraction(scores > t) <= coverage.
double threshold_at_coverage(const Vector& scores, double coverage);

struct PostShift {
    std::vector<double> thresholds;  // indexed by group id
    double target_fpr = 0.0;
    double coverage = 0.0;           // achieved on the bundle it was fitted on
};

/// Per-group thresholds with (approximately) equal group FPR and the requested overall coverage.
PostShift post_shift_thresholds(const EvalBundle& train_bundle, double coverage);

/// Mean aux score over examples flagged at `coverage`.
double mean_aux_of_flagged(const EvalBundle& b, double coverage);

/// Fraction correct when flagging score > threshold(group).
double accuracy_at_thresholds(const EvalBundle& b, const std::vector<double>& thresholds);

/// Threshold maximizing accuracy, searched over "below all scores" and every observed score.
double accuracy_maximizing_threshold(const EvalBundle& b);

/// Fraction of examples flagged when flagging score > threshold(group).
double coverage_at_thresholds(const EvalBundle& b, const std::vector<double>& thresholds);

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

enum class Orientation { maximize, minimize };

struct MetricSpec {
    std::string name;
    std::map<std::string, double> params;
};

struct MetricInfo {
    std::string name;
    Orientation orientation;
    std::vector<std::string> required;
    std::vector<std::string> optional;
    bool needs_train_bundle = false;
};

/// Names: precision_at_recall(target_recall), max_per_class_error([num_classes]),
/// worst_quartile_relative_error(t0,t1,t2), fairness_violation, accuracy,
/// post_shift_accuracy([coverage]), post_shift_fairness_violation([coverage]),
/// mean_aux_of_flagged(coverage). Bracketed parameters are optional.
const std::vector<MetricInfo>& metric_registry();
const MetricInfo& metric_info(const std::string& name);

/// Validates the parameter map against the registry (ConfigError on failure).
void validate_metric_spec(const MetricSpec& spec);

/// Raw metric value in its natural orientation. The fairness and post-shift metrics
/// choose thresholds on `train_bundle`.
double evaluate_metric_raw(const MetricSpec& spec, const EvalBundle& b, const EvalBundle* train_bundle = nullptr);

/// Larger is always better: minimize-oriented metrics are negated here, once.
double evaluate_metric(const MetricSpec& spec, const EvalBundle& b, const EvalBundle* train_bundle = nullptr);

} // namespace moew
