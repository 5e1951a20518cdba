#pragma once

#include "moew/data.hpp"
#include "moew/embed.hpp"
#include "moew/metrics.hpp"
#include "moew/nn.hpp"
#include "moew/search.hpp"
#include "moew/stats.hpp"
#include "moew/weights.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace moew {

struct CsvSource {
    /// Either one file with a split column, or three files.
    std::filesystem::path file;
    std::filesystem::path train, validation, test;
    CsvSchema schema;
};

struct DataConfig {
    std::variant<ToySpec, CsvSource> source;
    LabelTransform label_transform = LabelTransform::identity;
    bool standardize = true;
    /// Rows drawn without replacement from the training split per repeat; 0 keeps all.
    long train_subsample = 0;
};

enum class GeneratorKind { bucb, random, grid };
const char* to_string(GeneratorKind kind);

struct EmbeddingConfig {
    EmbedderKind kind = EmbedderKind::autoencoder;
    AutoencoderConfig autoencoder;
};

enum class BaselineMethod { uniform, random, importance, user, density_ratio };
const char* to_string(BaselineMethod kind);

struct BaselineSpec {
    BaselineMethod kind = BaselineMethod::uniform;
    long budget = 1;
    std::filesystem::path user_file;  // user only
};

struct ExperimentConfig {
    DataConfig data;
    MetricSpec metric;
    std::vector<int> model_hidden;
    TrainConfig model_train;
    EmbeddingConfig embedding;
    ImportanceKind importance = ImportanceKind::class_ratio;
    std::vector<double> importance_ratios;  // user_supplied only, indexed by class
    int batches = 10;  // B
    BucbConfig bucb;   // K, p, q, R, acquisition samples
    GeneratorKind generator = GeneratorKind::bucb;
    double grid_epsilon = 0.5;
    int noise_seeds = 5;
    bool run_moew = true;
    std::vector<BaselineSpec> baselines;
    int repeats = 1;
    std::uint64_t seed = 0;
    int jobs = 1;

    /// Throws ConfigError naming the offending key.
    void validate() const;
};

struct RunRecord {
    std::string method;
    int repeat = 0;
    int batch = 0;
    int candidate = 0;
    Vector alpha;  // empty for baselines
    double val_metric = 0.0;
    double test_metric = 0.0;
    double wall_time_s = 0.0;
};

/// Data, embedder, and importance table shared by every method within one repeat.
struct RepeatContext {
    int repeat = 0;
    SplitData model_data;     // standardized features, transformed labels
    Vector val_labels;        // original units
    Vector test_labels;
    Vector train_labels;
    LabelTransform label_transform = LabelTransform::identity;
    Standardizer standardizer;
    bool standardized = false;
    MlpArchitecture architecture;
    Embedder embedder;
    ImportanceTable importance;
    std::optional<ExampleWeighter> weighter;
    /// Per-row training density ratio (toy data only).
    std::optional<Vector> density_ratio;
    /// Training rows kept by the subsample, in order (empty when all rows are kept).
    std::vector<Eigen::Index> train_rows;
    Eigen::Index full_train_size = 0;
};

/// Loads or generates the data for `repeat` and fits the embedder and importance table.
RepeatContext prepare_repeat(const ExperimentConfig& cfg, int repeat);

struct CandidateScore {
    double val_metric = 0.0;
    double test_metric = 0.0;
    double wall_time_s = 0.0;
    ModelParams params;
    bool diverged = false;
};

/// Trains one weighted model and scores it. Divergence yields -inf metrics.
CandidateScore train_and_score(const ExperimentConfig& cfg, const RepeatContext& ctx, const Vector& weights,
                               std::uint64_t seed);

/// Validation metric of a trained model, larger is better.
double score_model(const ExperimentConfig& cfg, const RepeatContext& ctx, const ModelParams& params,
                   SplitRole role);

struct MethodResult {
    RunRecord best;
    std::vector<RunRecord> records;
    ModelParams best_params;
    Weights best_weights;  // MOEW only: selected weights and their normalizer
    double noise_variance = 0.0;
};

/// Training seed of candidate (batch, candidate) in `repeat`.
std::uint64_t candidate_seed(std::uint64_t master, int repeat, int batch, int candidate);

/// Sample variance of the validation metric at alpha = 0 over cfg.noise_seeds seeds.
double estimate_noise_variance(const ExperimentConfig& cfg, const RepeatContext& ctx);

/// The outer search loop for one repeat.
MethodResult run_moew(const ExperimentConfig& cfg, const RepeatContext& ctx);
MethodResult run_moew(const ExperimentConfig& cfg, int repeat = 0);

/// Best of `spec.budget` trainings with fixed weights and distinct seeds.
MethodResult run_baseline(const ExperimentConfig& cfg, const RepeatContext& ctx, const BaselineSpec& spec);

/// Picks the record with the largest validation metric, earliest on ties.
std::size_t select_best(const std::vector<RunRecord>& records);

struct ExperimentResult {
    std::vector<RunRecord> records;
    /// Method -> selected record per repeat.
    std::map<std::string, std::vector<RunRecord>> selected;
    std::map<std::string, Summary> summary;
};

/// Called once per (repeat, method) with the selected model.
using SelectedCallback =
    std::function<void(const RepeatContext&, const std::string& method, const MethodResult&)>;

/// Runs every method for every repeat and summarizes the selected test metrics.
ExperimentResult run_repeats(const ExperimentConfig& cfg, const SelectedCallback& on_selected = {});

} // namespace moew
