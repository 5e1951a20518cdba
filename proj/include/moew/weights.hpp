#pragma once

#include "moew/data.hpp"
#include "moew/embed.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>

namespace moew {

inline constexpr double kImportanceFloor = 1e-3;
inline constexpr double kDefaultBallRadius = 3.0;

enum class ImportanceKind { class_ratio, histogram, constant_one, user_supplied };

const char* to_string(ImportanceKind kind);

/// Label-density ratio pi(y) = p_validation(y) / p_train(y).
struct ImportanceTable {
    ImportanceKind kind = ImportanceKind::constant_one;
    Vector class_ratio;   // class_ratio / user_supplied: indexed by class
    Vector bin_edges;     // histogram: ascending interior edges
    Vector bin_ratio;     // histogram: one per bin (edges.size() + 1)
    double floor = kImportanceFloor;

    double operator()(double label) const;
    Vector evaluate(const Vector& labels) const;
    /// Histogram bin of a label: the number of interior edges <= label.
    Eigen::Index bin_of(double label) const;
};

/// class_ratio: per-class frequency ratio. histogram: 10 equal-frequency bins on the
/// training labels. Ratios are clamped below by `floor`.
ImportanceTable estimate_importance(const Vector& train_labels, const Vector& val_labels, ImportanceKind kind,
                                    int num_bins = 10, double floor = kImportanceFloor);

/// Per-class ratios given directly by the caller.
ImportanceTable user_importance(Vector class_ratio, double floor = kImportanceFloor);

struct WeightParams {
    Vector alpha;
};

struct Weights {
    Vector values;      // mean 1 over the dataset
    double scale = 1.0; // c such that values = c * pi * sigmoid(z . alpha)
};

/// Precomputes embeddings and pi for one dataset so candidate alphas are cheap to evaluate.
class ExampleWeighter {
public:
    ExampleWeighter(const Dataset& ds, const Embedder& embedder, const ImportanceTable& importance);
    ExampleWeighter(Matrix embeddings, Vector importance_values);

    int dim() const { return static_cast<int>(codes_.cols()); }
    Eigen::Index size() const { return codes_.rows(); }
    const Matrix& codes() const { return codes_; }
    const Vector& importance() const { return pi_; }

    /// pi(y_j) * sigmoid(z_j . alpha) before normalization.
    Vector unnormalized(const Vector& alpha) const;
    Weights operator()(const Vector& alpha) const;

private:
    Matrix codes_;
    Vector pi_;
};

/// w_j = c * pi(y_j) * sigmoid(z(x_j, y_j) . alpha), with c making the mean over `ds` equal 1.
Vector eval_weights(const WeightParams& alpha, const Dataset& ds, const Embedder& embedder,
                    const ImportanceTable& importance);

/// Normalizes a positive vector to mean 1.
Vector normalize_mean_one(const Vector& w);

struct UniformWeighting {};
struct RandomWeighting {
    std::uint64_t seed = 0;
};
struct ImportanceWeighting {
    ImportanceTable table;
};
/// Per-example ratios, e.g. an analytic feature-density ratio, row-aligned with the data.
struct UserWeighting {
    Vector ratios;
};

using BaselineKind = std::variant<UniformWeighting, RandomWeighting, ImportanceWeighting, UserWeighting>;

Vector baseline_weights(const Dataset& ds, const BaselineKind& kind);

/// One positive real per line. Throws ContractError when the count differs from `expected_rows`.
Vector load_user_weights(const std::filesystem::path& path, Eigen::Index expected_rows);
void save_user_weights(const std::filesystem::path& path, const Vector& ratios);

} // namespace moew
