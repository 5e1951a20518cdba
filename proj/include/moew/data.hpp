#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace moew {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class SplitRole { train, validation, test };

/// How labels are interpreted. Binary labels are 0/1; multiclass labels are
/// dense indices 0..C-1; regression labels are arbitrary reals.
enum class LabelKind { regression, binary, multiclass };

const char* to_string(SplitRole role);
const char* to_string(LabelKind kind);

/// Dense string -> index mapping that assigns indices by first appearance.
/// Shared across files so that class and group ids agree between splits.
class CategoryIndex {
public:
    CategoryIndex() = default;
    explicit CategoryIndex(std::vector<std::string> predeclared);

    /// Index of `token`, inserting it if new and the index is not frozen.
    std::optional<int> lookup_or_insert(const std::string& token);
    std::optional<int> lookup(const std::string& token) const;

    void freeze() { frozen_ = true; }
    int size() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    bool frozen_ = false;
};

struct Dataset {
    Matrix features;                       // n x D
    Vector labels;                         // n
    LabelKind label_kind = LabelKind::regression;
    int num_classes = 0;                   // C for binary (2) and multiclass
    std::vector<std::string> class_names;  // optional, index -> original token
    std::optional<std::vector<int>> groups;
    std::vector<std::string> group_names;
    std::optional<Vector> aux_scores;
    SplitRole role = SplitRole::train;

    Eigen::Index size() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }

    /// Throws ContractError when an invariant is broken.
    void validate() const;

    /// Rows `idx` in the given order.
    Dataset subset(const std::vector<Eigen::Index>& idx) const;
};

struct SplitData {
    Dataset train;
    Dataset validation;
    Dataset test;
};

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

enum class ColumnRole { feature, label, group, aux_score, split };

struct CsvSchema {
    /// Header name -> role. Columns not listed are ignored.
    std::vector<std::pair<std::string, ColumnRole>> columns;
    LabelKind label_kind = LabelKind::regression;
    /// Multiclass only: fixes the class order. Empty means first appearance.
    std::vector<std::string> classes;
};

/// Shared id dictionaries for loading several files consistently.
struct CsvDictionaries {
    CategoryIndex classes;
    CategoryIndex groups;
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema,
                 SplitRole role = SplitRole::train, CsvDictionaries* dicts = nullptr);

/// Loads a single file with a `split` column whose values are train/validation/test.
SplitData load_csv_split(const std::filesystem::path& path, const CsvSchema& schema);

/// Loads three separate files that share one schema.
SplitData load_csv_files(const std::filesystem::path& train, const std::filesystem::path& validation,
                         const std::filesystem::path& test, const CsvSchema& schema);

/// Writes features (x0..), label, and optional group/aux columns.
void write_csv(const std::filesystem::path& path, const Dataset& ds);

// ---------------------------------------------------------------------------
// Synthetic two-feature task
// ---------------------------------------------------------------------------

struct BetaParams {
    double a = 1.0;
    double b = 1.0;
};

struct ToySpec {
    long n_train = 5000;
    long n_val = 1000;
    long n_test = 5000;
    std::array<BetaParams, 2> beta_train{{{2.0, 1.0}, {2.0, 1.0}}};
    std::array<BetaParams, 2> beta_test{{{1.0, 2.0}, {1.0, 2.0}}};
    double label_noise = 0.15;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Clean label of the synthetic task: positive above the anti-diagonal.
inline int toy_clean_label(double x1, double x2) { return x1 + x2 > 1.0 ? 1 : 0; }

/// Validation and test splits are drawn from `beta_test`.
SplitData generate_toy(const ToySpec& spec);

/// p_test(x) / p_train(x) for the product-of-betas feature densities.
double toy_density_ratio(const ToySpec& spec, double x1, double x2);

double beta_log_pdf(double x, BetaParams p);

// ---------------------------------------------------------------------------
// Label transforms and feature scaling
// ---------------------------------------------------------------------------

enum class LabelTransform { identity, log };

Dataset transform_labels(const Dataset& ds, LabelTransform kind);
double inverse_transform_label(double value, LabelTransform kind);
Vector inverse_transform_labels(const Vector& values, LabelTransform kind);

/// Per-column affine scaling fitted on the training split.
struct Standardizer {
    Vector mean;
    Vector scale;  // 1/sd, or 1 for constant columns

    static Standardizer fit(const Matrix& features);
    Matrix apply(const Matrix& features) const;
    Dataset apply(const Dataset& ds) const;
};

} // namespace moew
