#include "moew/weights.hpp"

#include "moew/errors.hpp"
#include "moew/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

namespace moew {

const char* to_string(ImportanceKind kind) {
    switch (kind) {
    case ImportanceKind::class_ratio: return "class_ratio";
    case ImportanceKind::histogram: return "histogram";
    case ImportanceKind::constant_one: return "constant_one";
    case ImportanceKind::user_supplied: return "user_supplied";
    }
    return "?";
}

Eigen::Index ImportanceTable::bin_of(double label) const {
    return static_cast<Eigen::Index>(std::upper_bound(bin_edges.data(), bin_edges.data() + bin_edges.size(), label) -
                                     bin_edges.data());
}

double ImportanceTable::operator()(double label) const {
    switch (kind) {
    case ImportanceKind::constant_one: return 1.0;
    case ImportanceKind::class_ratio:
    case ImportanceKind::user_supplied: {
        const auto c = static_cast<Eigen::Index>(label);
        if (c < 0 || c >= class_ratio.size()) throw ContractError("label outside importance table");
        return class_ratio[c];
    }
    case ImportanceKind::histogram: return bin_ratio[bin_of(label)];
    }
    return 1.0;
}

Vector ImportanceTable::evaluate(const Vector& labels) const {
    Vector out(labels.size());
    for (Eigen::Index i = 0; i < labels.size(); ++i) out[i] = (*this)(labels[i]);
    return out;
}

ImportanceTable estimate_importance(const Vector& train_labels, const Vector& val_labels, ImportanceKind kind,
                                    int num_bins, double floor) {
    if (train_labels.size() == 0 || val_labels.size() == 0)
        throw EstimationError("importance estimation needs nonempty label sets");
    if (!(floor > 0.0)) throw ContractError("importance floor must be positive");
    ImportanceTable t;
    t.kind = kind;
    t.floor = floor;
    const double nt = static_cast<double>(train_labels.size());
    const double nv = static_cast<double>(val_labels.size());
    switch (kind) {
    case ImportanceKind::constant_one: return t;
    case ImportanceKind::user_supplied:
        throw ContractError("user-supplied importance is built with user_importance()");
    case ImportanceKind::class_ratio: {
        auto as_class = [](double y) {
            if (y < 0 || y != std::floor(y)) throw EstimationError("class_ratio needs class-index labels");
            return static_cast<Eigen::Index>(y);
        };
        Eigen::Index classes = 0;
        for (double y : train_labels) classes = std::max(classes, as_class(y) + 1);
        for (double y : val_labels) classes = std::max(classes, as_class(y) + 1);
        Vector ft = Vector::Zero(classes), fv = Vector::Zero(classes);
        for (double y : train_labels) ft[as_class(y)] += 1.0;
        for (double y : val_labels) fv[as_class(y)] += 1.0;
        t.class_ratio.resize(classes);
        for (Eigen::Index c = 0; c < classes; ++c) {
            if (ft[c] == 0.0) {
                if (fv[c] > 0.0)
                    throw EstimationError("class " + std::to_string(c) + " appears in validation but not in training");
                t.class_ratio[c] = 1.0;
                continue;
            }
            t.class_ratio[c] = std::max(floor, (fv[c] / nv) / (ft[c] / nt));
        }
        return t;
    }
    case ImportanceKind::histogram: {
        if (num_bins < 1) throw ContractError("histogram needs at least one bin");
        std::vector<double> sorted(train_labels.data(), train_labels.data() + train_labels.size());
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> edges;
        for (int k = 1; k < num_bins; ++k) {
            auto pos = static_cast<std::size_t>(static_cast<double>(k) * nt / num_bins);
            pos = std::min(pos, sorted.size() - 1);
            double e = sorted[pos];
            if (e > sorted.front() && (edges.empty() || e > edges.back())) edges.push_back(e);
        }
        t.bin_edges = Eigen::Map<Vector>(edges.data(), static_cast<Eigen::Index>(edges.size()));
        const Eigen::Index bins = t.bin_edges.size() + 1;
        Vector ct = Vector::Zero(bins), cv = Vector::Zero(bins);
        for (double y : train_labels) ct[t.bin_of(y)] += 1.0;
        for (double y : val_labels) cv[t.bin_of(y)] += 1.0;
        t.bin_ratio.resize(bins);
        for (Eigen::Index b = 0; b < bins; ++b)
            t.bin_ratio[b] = ct[b] == 0.0 ? 1.0 : std::max(floor, (cv[b] / nv) / (ct[b] / nt));
        return t;
    }
    }
    return t;
}

ImportanceTable user_importance(Vector class_ratio, double floor) {
    ImportanceTable t;
    t.kind = ImportanceKind::user_supplied;
    t.floor = floor;
    if (!class_ratio.allFinite()) throw ContractError("importance ratios must be finite");
    t.class_ratio = class_ratio.cwiseMax(floor);
    return t;
}

ExampleWeighter::ExampleWeighter(const Dataset& ds, const Embedder& embedder, const ImportanceTable& importance)
    : ExampleWeighter(embedder.embed(ds), importance.evaluate(ds.labels)) {}

ExampleWeighter::ExampleWeighter(Matrix embeddings, Vector importance_values)
    : codes_(std::move(embeddings)), pi_(std::move(importance_values)) {
    if (codes_.rows() < 1) throw ContractError("weighting needs a nonempty dataset");
    if (codes_.rows() != pi_.size()) throw ContractError("embedding and importance lengths differ");
    if (!(pi_.array() > 0.0).all() || !pi_.allFinite()) throw ContractError("importance values must be positive");
}

Vector ExampleWeighter::unnormalized(const Vector& alpha) const {
    if (alpha.size() != codes_.cols())
        throw ContractError("alpha has dimension " + std::to_string(alpha.size()) + ", embedding has " +
                            std::to_string(codes_.cols()));
    Vector s = codes_ * alpha;
    // Scalar exp keeps equal inputs bitwise equal regardless of position.
    return pi_.binaryExpr(s, [](double p, double v) { return p / (1.0 + std::exp(-v)); });
}

Weights ExampleWeighter::operator()(const Vector& alpha) const {
    Vector raw = unnormalized(alpha);
    Weights w;
    w.scale = static_cast<double>(raw.size()) / raw.sum();
    w.values = raw * w.scale;
    return w;
}

Vector eval_weights(const WeightParams& alpha, const Dataset& ds, const Embedder& embedder,
                    const ImportanceTable& importance) {
    return ExampleWeighter(ds, embedder, importance)(alpha.alpha).values;
}

Vector normalize_mean_one(const Vector& w) {
    if (w.size() == 0) throw ContractError("empty weight vector");
    if (!w.allFinite() || !(w.array() > 0.0).all()) throw ContractError("weights must be finite and positive");
    return w * (static_cast<double>(w.size()) / w.sum());
}

Vector baseline_weights(const Dataset& ds, const BaselineKind& kind) {
    const Eigen::Index n = ds.size();
    if (n < 1) throw ContractError("baseline weights need a nonempty dataset");
    struct Visitor {
        const Dataset& ds;
        Eigen::Index n;
        Vector operator()(const UniformWeighting&) const { return Vector::Ones(n); }
        Vector operator()(const RandomWeighting& r) const {
            Rng rng(r.seed);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            Vector w(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                double u = unif(rng);
                while (u <= 0.0) u = unif(rng);
                w[i] = u;
            }
            return normalize_mean_one(w);
        }
        Vector operator()(const ImportanceWeighting& iw) const {
            return normalize_mean_one(iw.table.evaluate(ds.labels));
        }
        Vector operator()(const UserWeighting& u) const {
            if (u.ratios.size() != n)
                throw ContractError("user weights have " + std::to_string(u.ratios.size()) + " rows, dataset has " +
                                    std::to_string(n));
            return normalize_mean_one(u.ratios);
        }
    };
    return std::visit(Visitor{ds, n}, kind);
}

Vector load_user_weights(const std::filesystem::path& path, Eigen::Index expected_rows) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open weights file '" + path.string() + "'");
    std::vector<double> vals;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
        if (ec != std::errc{} || ptr != line.data() + line.size() || !std::isfinite(v) || v <= 0.0)
            throw ParseError(row, "weight", "expected a positive real, got '" + line + "'");
        vals.push_back(v);
    }
    if (static_cast<Eigen::Index>(vals.size()) != expected_rows)
        throw ContractError("weights file has " + std::to_string(vals.size()) + " rows, expected " +
                            std::to_string(expected_rows));
    return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void save_user_weights(const std::filesystem::path& path, const Vector& ratios) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out.imbue(std::locale::classic());
    out.precision(17);
    for (double r : ratios) out << r << "\n";
}

} // namespace moew
