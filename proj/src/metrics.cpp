#include "moew/metrics.hpp"

#include "moew/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace moew {

void EvalBundle::validate() const {
    if (scores.size() != labels.size()) throw ContractError("scores and labels differ in length");
    if (groups && static_cast<Eigen::Index>(groups->size()) != scores.size())
        throw ContractError("groups and scores differ in length");
    if (aux_scores && aux_scores->size() != scores.size())
        throw ContractError("aux scores and scores differ in length");
}

namespace {

std::vector<Eigen::Index> order_desc(const Vector& scores) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(scores.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    return idx;
}

bool is_positive(double label) { return label > 0.5; }

struct RecallCut {
    double precision;
    double cutoff;
};

RecallCut recall_cut(const EvalBundle& b, double target_recall) {
    b.validate();
    if (!(target_recall >= 0.0 && target_recall <= 1.0)) throw MetricError("target recall must lie in [0,1]");
    double positives = 0;
    for (double y : b.labels) positives += is_positive(y) ? 1 : 0;
    if (positives == 0) throw MetricError("precision at recall needs at least one positive");
    auto idx = order_desc(b.scores);
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < idx.size();) {
        const double s = b.scores[idx[i]];
        for (; i < idx.size() && b.scores[idx[i]] == s; ++i) (is_positive(b.labels[idx[i]]) ? tp : fp) += 1;
        if (tp / positives >= target_recall - 1e-12) return {tp / (tp + fp), s};
    }
    return {tp / (tp + fp), b.scores[idx.back()]};
}

std::vector<double> expand_thresholds(const std::vector<double>& thresholds, int num_groups) {
    if (thresholds.empty()) throw MetricError("no thresholds given");
    if (thresholds.size() == 1) return std::vector<double>(static_cast<std::size_t>(std::max(num_groups, 1)), thresholds[0]);
    if (static_cast<int>(thresholds.size()) < num_groups) throw MetricError("fewer thresholds than groups");
    return thresholds;
}

int group_count(const EvalBundle& b) {
    if (!b.groups) return 1;
    int g = 0;
    for (int v : *b.groups) {
        if (v < 0) throw MetricError("group ids must be non-negative");
        g = std::max(g, v + 1);
    }
    return g;
}

int group_of(const EvalBundle& b, Eigen::Index i) { return b.groups ? (*b.groups)[static_cast<std::size_t>(i)] : 0; }

double below(double x) { return std::nextafter(x, -std::numeric_limits<double>::infinity()); }

} // namespace

double precision_at_recall(const EvalBundle& b, double target_recall) {
    return recall_cut(b, target_recall).precision;
}

double precision_at_recall_cutoff(const EvalBundle& b, double target_recall) {
    return recall_cut(b, target_recall).cutoff;
}

double max_per_class_error(const EvalBundle& b, int num_classes) {
    b.validate();
    if (num_classes < 1) throw MetricError("need at least one class");
    std::vector<double> total(static_cast<std::size_t>(num_classes), 0.0), wrong(total);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        const auto y = static_cast<long>(b.labels[i]);
        if (y < 0 || y >= num_classes) throw MetricError("label outside class range");
        total[static_cast<std::size_t>(y)] += 1;
        if (std::lround(b.scores[i]) != y) wrong[static_cast<std::size_t>(y)] += 1;
    }
    double worst = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        if (total[static_cast<std::size_t>(c)] == 0)
            throw MetricError("class " + std::to_string(c) + " is absent from the labels");
        worst = std::max(worst, wrong[static_cast<std::size_t>(c)] / total[static_cast<std::size_t>(c)]);
    }
    return worst;
}

double worst_quartile_relative_error(const EvalBundle& b, const std::array<double, 3>& thresholds) {
    b.validate();
    if (!(thresholds[0] <= thresholds[1] && thresholds[1] <= thresholds[2]))
        throw MetricError("bucket thresholds must be ascending");
    std::array<double, 4> sum{}, count{};
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        const double y = b.labels[i];
        if (!(y > 0.0)) throw MetricError("relative error needs positive labels");
        std::size_t q = 0;
        while (q < 3 && y >= thresholds[q]) ++q;
        sum[q] += std::abs(b.scores[i] / y - 1.0);
        count[q] += 1;
    }
    double worst = 0.0;
    for (std::size_t q = 0; q < 4; ++q) {
        if (count[q] == 0) throw MetricError("bucket " + std::to_string(q) + " is empty");
        worst = std::max(worst, sum[q] / count[q]);
    }
    return worst;
}

double fairness_violation_fpr_gap(const EvalBundle& b, const std::vector<double>& thresholds) {
    b.validate();
    const int groups = group_count(b);
    auto th = expand_thresholds(thresholds, groups);
    std::vector<double> neg(static_cast<std::size_t>(groups), 0.0), fp(neg), present(neg);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        const auto g = static_cast<std::size_t>(group_of(b, i));
        present[g] = 1;
        if (!is_positive(b.labels[i])) {
            neg[g] += 1;
            if (b.scores[i] > th[g]) fp[g] += 1;
        }
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t g = 0; g < neg.size(); ++g) {
        if (present[g] == 0) continue;
        if (neg[g] == 0) throw MetricError("group " + std::to_string(g) + " has no negatives");
        const double fpr = fp[g] / neg[g];
        lo = std::min(lo, fpr);
        hi = std::max(hi, fpr);
    }
    return hi - lo;
}

double threshold_at_coverage(const Vector& scores, double coverage) {
    if (scores.size() == 0) throw MetricError("threshold needs at least one score");
    if (!(coverage > 0.0 && coverage <= 1.0)) throw MetricError("coverage must lie in (0,1]");
    const auto n = static_cast<std::size_t>(scores.size());
    const auto max_flagged = static_cast<std::size_t>(std::floor(coverage * static_cast<double>(n) + 1e-9));
    std::vector<double> sorted(scores.data(), scores.data() + n);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    if (max_flagged >= n) return below(sorted.back());
    return sorted[max_flagged];
}

double coverage_at_thresholds(const EvalBundle& b, const std::vector<double>& thresholds) {
    auto th = expand_thresholds(thresholds, group_count(b));
    double flagged = 0;
    for (Eigen::Index i = 0; i < b.size(); ++i)
        if (b.scores[i] > th[static_cast<std::size_t>(group_of(b, i))]) flagged += 1;
    return flagged / static_cast<double>(b.size());
}

double accuracy_at_thresholds(const EvalBundle& b, const std::vector<double>& thresholds) {
    b.validate();
    auto th = expand_thresholds(thresholds, group_count(b));
    double correct = 0;
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        const bool flagged = b.scores[i] > th[static_cast<std::size_t>(group_of(b, i))];
        if (flagged == is_positive(b.labels[i])) correct += 1;
    }
    return correct / static_cast<double>(b.size());
}

double accuracy_maximizing_threshold(const EvalBundle& b) {
    b.validate();
    if (b.size() == 0) throw MetricError("empty bundle");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(b.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto x, auto y) { return b.scores[x] < b.scores[y]; });
    double positives = 0;
    for (double y : b.labels) positives += is_positive(y) ? 1 : 0;
    // Threshold below everything flags all rows: correct = positives.
    double correct = positives;
    double best = correct;
    double best_t = below(b.scores[idx.front()]);
    for (std::size_t i = 0; i < idx.size();) {
        const double s = b.scores[idx[i]];
        for (; i < idx.size() && b.scores[idx[i]] == s; ++i) correct += is_positive(b.labels[idx[i]]) ? -1 : 1;
        if (correct > best) {
            best = correct;
            best_t = s;
        }
    }
    return best_t;
}

PostShift post_shift_thresholds(const EvalBundle& train_bundle, double coverage) {
    const EvalBundle& b = train_bundle;
    b.validate();
    if (!(coverage > 0.0 && coverage <= 1.0)) throw MetricError("coverage must lie in (0,1]");
    const int groups = group_count(b);

    // Per group: candidate thresholds (descending) and their group FPR (ascending).
    struct Curve {
        std::vector<double> thresholds;
        std::vector<double> fpr;
        bool present = false;
    };
    std::vector<Curve> curves(static_cast<std::size_t>(groups));
    {
        std::vector<std::vector<std::pair<double, bool>>> members(static_cast<std::size_t>(groups));
        for (Eigen::Index i = 0; i < b.size(); ++i)
            members[static_cast<std::size_t>(group_of(b, i))].emplace_back(b.scores[i], is_positive(b.labels[i]));
        for (std::size_t g = 0; g < members.size(); ++g) {
            auto& m = members[g];
            if (m.empty()) continue;
            curves[g].present = true;
            std::sort(m.begin(), m.end(), [](auto& x, auto& y) { return x.first > y.first; });
            double neg = 0;
            for (auto& e : m) neg += e.second ? 0 : 1;
            if (neg == 0) throw MetricError("group " + std::to_string(g) + " has no negatives");
            double fp = 0;
            curves[g].thresholds.push_back(m.front().first);
            curves[g].fpr.push_back(0.0);
            for (std::size_t i = 0; i < m.size();) {
                const double s = m[i].first;
                for (; i < m.size() && m[i].first == s; ++i) fp += m[i].second ? 0 : 1;
                curves[g].thresholds.push_back(i < m.size() ? m[i].first : below(s));
                curves[g].fpr.push_back(fp / neg);
            }
        }
    }

    auto thresholds_for = [&](double target) {
        std::vector<double> th(static_cast<std::size_t>(groups), std::numeric_limits<double>::infinity());
        for (std::size_t g = 0; g < curves.size(); ++g) {
            if (!curves[g].present) continue;
            const auto& c = curves[g];
            std::size_t best = 0;
            double best_d = std::abs(c.fpr[0] - target);
            for (std::size_t k = 1; k < c.fpr.size(); ++k) {
                const double d = std::abs(c.fpr[k] - target);
                if (d < best_d) {  // strict: ties keep the higher threshold
                    best_d = d;
                    best = k;
                }
            }
            th[g] = c.thresholds[best];
        }
        return th;
    };
    auto cov = [&](double target) { return coverage_at_thresholds(b, thresholds_for(target)); };

    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 64; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cov(mid) < coverage) lo = mid;
        else hi = mid;
    }
    const double cl = cov(lo), ch = cov(hi);
    PostShift out;
    out.target_fpr = std::abs(ch - coverage) < std::abs(cl - coverage) ? hi : lo;
    out.thresholds = thresholds_for(out.target_fpr);
    out.coverage = coverage_at_thresholds(b, out.thresholds);
    return out;
}

double mean_aux_of_flagged(const EvalBundle& b, double coverage) {
    b.validate();
    if (!b.aux_scores) throw MetricError("mean aux score needs aux scores");
    const double t = threshold_at_coverage(b.scores, coverage);
    double sum = 0, count = 0;
    for (Eigen::Index i = 0; i < b.size(); ++i)
        if (b.scores[i] > t) {
            sum += (*b.aux_scores)[i];
            count += 1;
        }
    if (count == 0) throw MetricError("no examples flagged at this coverage");
    return sum / count;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

const std::vector<MetricInfo>& metric_registry() {
    static const std::vector<MetricInfo> registry = {
        {"precision_at_recall", Orientation::maximize, {"target_recall"}, {}, false},
        {"max_per_class_error", Orientation::minimize, {}, {"num_classes"}, false},
        {"worst_quartile_relative_error", Orientation::minimize, {"t0", "t1", "t2"}, {}, false},
        {"fairness_violation", Orientation::minimize, {}, {}, true},
        {"accuracy", Orientation::maximize, {}, {}, true},
        {"post_shift_accuracy", Orientation::maximize, {}, {"coverage"}, true},
        {"post_shift_fairness_violation", Orientation::minimize, {}, {"coverage"}, true},
        {"mean_aux_of_flagged", Orientation::maximize, {"coverage"}, {}, false},
    };
    return registry;
}

const MetricInfo& metric_info(const std::string& name) {
    for (const auto& m : metric_registry())
        if (m.name == name) return m;
    throw ConfigError("metric.name", "unknown metric '" + name + "'");
}

void validate_metric_spec(const MetricSpec& spec) {
    if (spec.name.empty()) throw ConfigError("metric.name", "missing metric name");
    const auto& info = metric_info(spec.name);
    for (const auto& r : info.required)
        if (!spec.params.count(r)) throw ConfigError("metric.params." + r, "required parameter missing");
    for (const auto& [k, v] : spec.params) {
        bool known = std::find(info.required.begin(), info.required.end(), k) != info.required.end() ||
                     std::find(info.optional.begin(), info.optional.end(), k) != info.optional.end();
        if (!known) throw ConfigError("metric.params." + k, "unknown parameter for " + spec.name);
        if (!std::isfinite(v)) throw ConfigError("metric.params." + k, "must be finite");
    }
}

namespace {

double param_or(const MetricSpec& s, const std::string& k, double fallback) {
    auto it = s.params.find(k);
    return it == s.params.end() ? fallback : it->second;
}

const EvalBundle& need_train(const EvalBundle* t, const std::string& name) {
    if (!t) throw MetricError(name + " needs the training predictions to choose thresholds");
    return *t;
}

PostShift fit_post_shift(const MetricSpec& spec, const EvalBundle& train) {
    double coverage = param_or(spec, "coverage", -1.0);
    if (coverage <= 0.0) {
        coverage = coverage_at_thresholds(train, {accuracy_maximizing_threshold(train)});
        if (coverage <= 0.0) coverage = 1.0 / static_cast<double>(train.size());
    }
    return post_shift_thresholds(train, coverage);
}

} // namespace

double evaluate_metric_raw(const MetricSpec& spec, const EvalBundle& b, const EvalBundle* train_bundle) {
    const auto& n = spec.name;
    if (n == "precision_at_recall") return precision_at_recall(b, param_or(spec, "target_recall", 0.95));
    if (n == "max_per_class_error") {
        int c = static_cast<int>(param_or(spec, "num_classes", b.labels.size() ? b.labels.maxCoeff() + 1 : 1));
        return max_per_class_error(b, c);
    }
    if (n == "worst_quartile_relative_error")
        return worst_quartile_relative_error(b, {spec.params.at("t0"), spec.params.at("t1"), spec.params.at("t2")});
    if (n == "fairness_violation")
        return fairness_violation_fpr_gap(b, {accuracy_maximizing_threshold(need_train(train_bundle, n))});
    if (n == "accuracy") return accuracy_at_thresholds(b, {accuracy_maximizing_threshold(need_train(train_bundle, n))});
    if (n == "post_shift_accuracy")
        return accuracy_at_thresholds(b, fit_post_shift(spec, need_train(train_bundle, n)).thresholds);
    if (n == "post_shift_fairness_violation")
        return fairness_violation_fpr_gap(b, fit_post_shift(spec, need_train(train_bundle, n)).thresholds);
    if (n == "mean_aux_of_flagged") return mean_aux_of_flagged(b, spec.params.at("coverage"));
    throw ConfigError("metric.name", "unknown metric '" + n + "'");
}

double evaluate_metric(const MetricSpec& spec, const EvalBundle& b, const EvalBundle* train_bundle) {
    const double raw = evaluate_metric_raw(spec, b, train_bundle);
    return metric_info(spec.name).orientation == Orientation::minimize ? -raw : raw;
}

} // namespace moew
