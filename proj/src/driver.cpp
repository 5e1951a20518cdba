#include "moew/driver.hpp"

#include "moew/errors.hpp"
#include "moew/parallel.hpp"
#include "moew/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace moew {

const char* to_string(GeneratorKind kind) {
    switch (kind) {
    case GeneratorKind::bucb: return "bucb";
    case GeneratorKind::random: return "random";
    case GeneratorKind::grid: return "grid";
    }
    return "?";
}

const char* to_string(BaselineMethod kind) {
    switch (kind) {
    case BaselineMethod::uniform: return "uniform";
    case BaselineMethod::random: return "random";
    case BaselineMethod::importance: return "importance";
    case BaselineMethod::user: return "user";
    case BaselineMethod::density_ratio: return "density_ratio";
    }
    return "?";
}

namespace {

template <typename Fn>
void rethrow_as_config(const std::string& key, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(key, e.what());
    }
}

LabelKind config_label_kind(const DataConfig& d) {
    if (std::holds_alternative<ToySpec>(d.source)) return LabelKind::binary;
    return std::get<CsvSource>(d.source).schema.label_kind;
}

} // namespace

void ExperimentConfig::validate() const {
    if (const auto* toy = std::get_if<ToySpec>(&data.source)) {
        rethrow_as_config("data.toy", [&] { toy->validate(); });
    } else {
        const auto& csv = std::get<CsvSource>(data.source);
        const bool single = !csv.file.empty();
        const bool triple = !csv.train.empty() || !csv.validation.empty() || !csv.test.empty();
        if (single == triple) throw ConfigError("data.csv", "give either file or train/validation/test");
        if (triple && (csv.train.empty() || csv.validation.empty() || csv.test.empty()))
            throw ConfigError("data.csv", "train, validation and test paths are all required");
        if (csv.schema.columns.empty()) throw ConfigError("data.csv.columns", "no columns given");
    }
    if (data.train_subsample < 0) throw ConfigError("data.train_subsample", "must be >= 0");
    const LabelKind lk = config_label_kind(data);
    if (data.label_transform == LabelTransform::log && lk != LabelKind::regression)
        throw ConfigError("data.label_transform", "log transform needs regression labels");

    validate_metric_spec(metric);
    for (int h : model_hidden)
        if (h < 1) throw ConfigError("model.hidden", "layer widths must be >= 1");
    rethrow_as_config("model.train", [&] { model_train.validate(); });
    if (embedding.kind == EmbedderKind::autoencoder) {
        rethrow_as_config("embedding", [&] { embedding.autoencoder.validate(); });
    } else if (lk == LabelKind::regression) {
        throw ConfigError("embedding.kind", "label_passthrough needs class labels");
    }
    if ((importance == ImportanceKind::class_ratio || importance == ImportanceKind::user_supplied) &&
        lk == LabelKind::regression)
        throw ConfigError("importance.kind", "class ratios need class labels");
    if (importance == ImportanceKind::user_supplied) {
        if (importance_ratios.empty()) throw ConfigError("importance.ratios", "required for user_supplied");
        for (double r : importance_ratios)
            if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("importance.ratios", "ratios must be positive");
    }
    if (batches < 1) throw ConfigError("search.batches", "B must be >= 1");
    rethrow_as_config("search", [&] { bucb.validate(); });
    if (generator == GeneratorKind::grid && !(grid_epsilon > 0.0 && grid_epsilon <= 1.0))
        throw ConfigError("search.epsilon", "must lie in (0,1]");
    if (noise_seeds < 1) throw ConfigError("search.noise_seeds", "must be >= 1");
    std::set<BaselineMethod> seen;
    for (std::size_t i = 0; i < baselines.size(); ++i) {
        const auto& b = baselines[i];
        const std::string key = "baselines[" + std::to_string(i) + "]";
        if (b.budget < 1) throw ConfigError(key + ".budget", "must be >= 1");
        if (!seen.insert(b.kind).second) throw ConfigError(key + ".kind", "duplicate baseline");
        if (b.kind == BaselineMethod::user && b.user_file.empty())
            throw ConfigError(key + ".file", "user baseline needs a weights file");
        if (b.kind == BaselineMethod::density_ratio && !std::holds_alternative<ToySpec>(data.source))
            throw ConfigError(key + ".kind", "density_ratio is only known for the toy data");
        if (b.kind == BaselineMethod::importance && lk == LabelKind::regression &&
            importance != ImportanceKind::histogram)
            throw ConfigError(key + ".kind", "regression importance needs the histogram estimator");
    }
    if (!run_moew && baselines.empty()) throw ConfigError("methods", "nothing to run");
    if (repeats < 1) throw ConfigError("repeats", "must be >= 1");
    if (jobs < 1) throw ConfigError("jobs", "must be >= 1");
}

// ---------------------------------------------------------------------------
// Per-repeat preparation
// ---------------------------------------------------------------------------

RepeatContext prepare_repeat(const ExperimentConfig& cfg, int repeat) {
    cfg.validate();
    const auto r = static_cast<std::uint64_t>(repeat);
    RepeatContext ctx;
    ctx.repeat = repeat;
    ctx.label_transform = cfg.data.label_transform;

    SplitData raw;
    std::optional<ToySpec> toy;
    if (const auto* spec = std::get_if<ToySpec>(&cfg.data.source)) {
        toy = *spec;
        toy->seed = derive_seed(cfg.seed, {r, stage(SeedStage::data)});
        raw = generate_toy(*toy);
    } else {
        const auto& csv = std::get<CsvSource>(cfg.data.source);
        raw = csv.file.empty() ? load_csv_files(csv.train, csv.validation, csv.test, csv.schema)
                               : load_csv_split(csv.file, csv.schema);
    }
    if (raw.validation.size() == 0) throw ContractError("validation set is empty");
    if (raw.train.size() == 0) throw ContractError("training set is empty");

    ctx.full_train_size = raw.train.size();
    if (cfg.data.train_subsample > 0 && cfg.data.train_subsample < raw.train.size()) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(raw.train.size()));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        Rng rng(derive_seed(cfg.seed, {r, stage(SeedStage::subsample)}));
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(cfg.data.train_subsample));
        std::sort(idx.begin(), idx.end());
        raw.train = raw.train.subset(idx);
        ctx.train_rows = std::move(idx);
    }

    if (toy) {
        Vector ratio(raw.train.size());
        for (Eigen::Index i = 0; i < raw.train.size(); ++i)
            ratio[i] = toy_density_ratio(*toy, raw.train.features(i, 0), raw.train.features(i, 1));
        ctx.density_ratio = std::move(ratio);
    }

    ctx.train_labels = raw.train.labels;
    ctx.val_labels = raw.validation.labels;
    ctx.test_labels = raw.test.labels;
    SplitData model{transform_labels(raw.train, ctx.label_transform),
                    transform_labels(raw.validation, ctx.label_transform),
                    transform_labels(raw.test, ctx.label_transform)};
    if (cfg.data.standardize) {
        ctx.standardizer = Standardizer::fit(model.train.features);
        ctx.standardized = true;
        model.train = ctx.standardizer.apply(model.train);
        model.validation = ctx.standardizer.apply(model.validation);
        model.test = ctx.standardizer.apply(model.test);
    }
    ctx.model_data = std::move(model);
    const Dataset& train = ctx.model_data.train;

    ctx.architecture.layer_sizes.push_back(static_cast<int>(train.dim()));
    for (int h : cfg.model_hidden) ctx.architecture.layer_sizes.push_back(h);
    ctx.architecture.layer_sizes.push_back(output_width(train));
    ctx.architecture.output_kind = default_output(train.label_kind);

    if (cfg.embedding.kind == EmbedderKind::autoencoder) {
        AutoencoderConfig ae = cfg.embedding.autoencoder;
        ae.train.seed = derive_seed(cfg.seed, {r, stage(SeedStage::embedder)});
        ctx.embedder = train_autoencoder(train, ae);
    } else {
        ctx.embedder = label_passthrough_embedder(train);
    }

    if (cfg.importance == ImportanceKind::user_supplied) {
        ctx.importance = user_importance(
            Eigen::Map<const Vector>(cfg.importance_ratios.data(), static_cast<Eigen::Index>(cfg.importance_ratios.size())));
    } else {
        ctx.importance = estimate_importance(train.labels, ctx.model_data.validation.labels, cfg.importance);
    }
    ctx.weighter.emplace(train, ctx.embedder, ctx.importance);
    return ctx;
}

// ---------------------------------------------------------------------------
// Training and scoring
// ---------------------------------------------------------------------------

namespace {

EvalBundle bundle_for(const RepeatContext& ctx, const ModelParams& params, SplitRole role) {
    const Dataset& ds = role == SplitRole::train        ? ctx.model_data.train
                        : role == SplitRole::validation ? ctx.model_data.validation
                                                        : ctx.model_data.test;
    EvalBundle b;
    b.scores = predict_scores(params, ds.features);
    if (ds.label_kind == LabelKind::regression) b.scores = inverse_transform_labels(b.scores, ctx.label_transform);
    b.labels = role == SplitRole::train ? ctx.train_labels : role == SplitRole::validation ? ctx.val_labels : ctx.test_labels;
    b.groups = ds.groups;
    b.aux_scores = ds.aux_scores;
    return b;
}

double score_split(const ExperimentConfig& cfg, const RepeatContext& ctx, const ModelParams& params, SplitRole role,
                   const std::optional<EvalBundle>& train_bundle) {
    const EvalBundle b = bundle_for(ctx, params, role);
    return evaluate_metric(cfg.metric, b, train_bundle ? &*train_bundle : nullptr);
}

} // namespace

double score_model(const ExperimentConfig& cfg, const RepeatContext& ctx, const ModelParams& params, SplitRole role) {
    std::optional<EvalBundle> tb;
    if (metric_info(cfg.metric.name).needs_train_bundle) tb = bundle_for(ctx, params, SplitRole::train);
    return score_split(cfg, ctx, params, role, tb);
}

CandidateScore train_and_score(const ExperimentConfig& cfg, const RepeatContext& ctx, const Vector& weights,
                               std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    CandidateScore s;
    TrainConfig tc = cfg.model_train;
    tc.loss = default_loss(ctx.model_data.train.label_kind);
    tc.seed = seed;
    try {
        s.params = train_weighted(ctx.model_data.train, weights, ctx.architecture, tc);
        if (!s.params.all_finite()) throw DivergenceError(tc.steps);
        std::optional<EvalBundle> tb;
        if (metric_info(cfg.metric.name).needs_train_bundle) tb = bundle_for(ctx, s.params, SplitRole::train);
        s.val_metric = score_split(cfg, ctx, s.params, SplitRole::validation, tb);
        s.test_metric = score_split(cfg, ctx, s.params, SplitRole::test, tb);
        if (!std::isfinite(s.val_metric)) throw DivergenceError(tc.steps);
    } catch (const DivergenceError&) {
        s.diverged = true;
        s.val_metric = -std::numeric_limits<double>::infinity();
        s.test_metric = -std::numeric_limits<double>::infinity();
    }
    s.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return s;
}

std::uint64_t candidate_seed(std::uint64_t master, int repeat, int batch, int candidate) {
    return derive_seed(master, {static_cast<std::uint64_t>(repeat), static_cast<std::uint64_t>(batch),
                                static_cast<std::uint64_t>(candidate), stage(SeedStage::training)});
}

std::size_t select_best(const std::vector<RunRecord>& records) {
    if (records.empty()) throw ContractError("no records to select from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < records.size(); ++i)
        if (records[i].val_metric > records[best].val_metric) best = i;
    return best;
}

double estimate_noise_variance(const ExperimentConfig& cfg, const RepeatContext& ctx) {
    const Vector w = (*ctx.weighter)(Vector::Zero(ctx.weighter->dim())).values;
    std::vector<double> vals(static_cast<std::size_t>(cfg.noise_seeds));
    parallel_for(vals.size(), cfg.jobs, [&](std::size_t i) {
        const auto seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(ctx.repeat), i, stage(SeedStage::noise)});
        vals[i] = train_and_score(cfg, ctx, w, seed).val_metric;
    });
    std::vector<double> finite;
    for (double v : vals)
        if (std::isfinite(v)) finite.push_back(v);
    if (finite.size() < 2) return 0.0;
    const double mean = std::accumulate(finite.begin(), finite.end(), 0.0) / static_cast<double>(finite.size());
    double ss = 0.0;
    for (double v : finite) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(finite.size() - 1);
}

namespace {

struct Trained {
    CandidateScore score;
    Weights weights;
};

/// Trains a batch of candidates (possibly concurrently) and appends records in index order.
void run_batch(const ExperimentConfig& cfg, const RepeatContext& ctx, int batch, const std::vector<Vector>& alphas,
               MethodResult& out, std::optional<Trained>& best) {
    std::vector<Trained> results(alphas.size());
    parallel_for(alphas.size(), cfg.jobs, [&](std::size_t k) {
        results[k].weights = (*ctx.weighter)(alphas[k]);
        results[k].score = train_and_score(cfg, ctx, results[k].weights.values,
                                           candidate_seed(cfg.seed, ctx.repeat, batch, static_cast<int>(k)));
    });
    bool any_ok = false;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        auto& t = results[k];
        any_ok = any_ok || !t.score.diverged;
        RunRecord rec{"moew", ctx.repeat, batch, static_cast<int>(k), alphas[k], t.score.val_metric,
                      t.score.test_metric, t.score.wall_time_s};
        if (!best || rec.val_metric > out.best.val_metric) {
            out.best = rec;
            best = std::move(t);
        }
        out.records.push_back(std::move(rec));
    }
    if (!any_ok) throw RunError("every candidate in batch " + std::to_string(batch) + " diverged");
}

} // namespace

MethodResult run_moew(const ExperimentConfig& cfg, const RepeatContext& ctx) {
    if (!ctx.weighter) throw ContractError("repeat context has no weighter");
    const int dim = ctx.weighter->dim();
    const int K = cfg.bucb.batch_size;
    const double R = cfg.bucb.radius;
    const auto r = static_cast<std::uint64_t>(ctx.repeat);
    auto batch_seed = [&](int b) {
        return derive_seed(cfg.seed, {r, static_cast<std::uint64_t>(b), stage(SeedStage::candidates)});
    };

    MethodResult out;
    std::optional<Trained> best;
    if (cfg.generator == GeneratorKind::grid) {
        auto cover = get_candidates_grid(dim, cfg.grid_epsilon);
        for (auto& a : cover) a *= R;
        for (std::size_t start = 0, b = 0; start < cover.size(); start += static_cast<std::size_t>(K), ++b) {
            const auto stop = std::min(cover.size(), start + static_cast<std::size_t>(K));
            std::vector<Vector> alphas(cover.begin() + static_cast<std::ptrdiff_t>(start),
                                       cover.begin() + static_cast<std::ptrdiff_t>(stop));
            run_batch(cfg, ctx, static_cast<int>(b), alphas, out, best);
        }
    } else {
        if (cfg.generator == GeneratorKind::bucb) out.noise_variance = estimate_noise_variance(cfg, ctx);
        for (int b = 0; b < cfg.batches; ++b) {
            std::vector<Vector> alphas;
            const int fresh = b == 0 ? K - 1 : K;
            if (b == 0) alphas.push_back(Vector::Zero(dim));
            if (fresh > 0) {
                std::vector<Vector> picks;
                if (cfg.generator == GeneratorKind::random) {
                    picks = get_candidates_random(fresh, dim, R, batch_seed(b));
                } else {
                    History history;
                    for (const auto& rec : out.records)
                        if (std::isfinite(rec.val_metric)) history.push_back({rec.alpha, rec.val_metric});
                    BucbConfig bc = cfg.bucb;
                    bc.batch_size = fresh;
                    bc.seed = batch_seed(b);
                    picks = get_candidates_bucb(history, dim, bc, out.noise_variance);
                }
                for (auto& p : picks) alphas.push_back(std::move(p));
            }
            run_batch(cfg, ctx, b, alphas, out, best);
        }
    }
    out.best_params = std::move(best->score.params);
    out.best_weights = std::move(best->weights);
    return out;
}

MethodResult run_moew(const ExperimentConfig& cfg, int repeat) { return run_moew(cfg, prepare_repeat(cfg, repeat)); }

MethodResult run_baseline(const ExperimentConfig& cfg, const RepeatContext& ctx, const BaselineSpec& spec) {
    if (spec.budget < 1) throw ContractError("baseline budget must be >= 1");
    const Dataset& train = ctx.model_data.train;
    const auto code = static_cast<std::uint64_t>(spec.kind);
    const auto r = static_cast<std::uint64_t>(ctx.repeat);

    std::optional<Vector> fixed;
    switch (spec.kind) {
    case BaselineMethod::uniform: fixed = baseline_weights(train, UniformWeighting{}); break;
    case BaselineMethod::importance: fixed = baseline_weights(train, ImportanceWeighting{ctx.importance}); break;
    case BaselineMethod::density_ratio:
        if (!ctx.density_ratio) throw ContractError("density ratio is unknown for this data");
        fixed = baseline_weights(train, UserWeighting{*ctx.density_ratio});
        break;
    case BaselineMethod::user: {
        // The file is row-aligned with the full training file; follow the subsample.
        Vector ratios = load_user_weights(spec.user_file, ctx.full_train_size);
        if (!ctx.train_rows.empty()) {
            Vector kept(static_cast<Eigen::Index>(ctx.train_rows.size()));
            for (std::size_t i = 0; i < ctx.train_rows.size(); ++i)
                kept[static_cast<Eigen::Index>(i)] = ratios[ctx.train_rows[i]];
            ratios = std::move(kept);
        }
        fixed = baseline_weights(train, UserWeighting{ratios});
        break;
    }
    case BaselineMethod::random: break;
    }

    const auto n = static_cast<std::size_t>(spec.budget);
    std::vector<CandidateScore> scores(n);
    parallel_for(n, cfg.jobs, [&](std::size_t k) {
        const auto seed = derive_seed(cfg.seed, {r, code, k, stage(SeedStage::baseline)});
        const Vector w = fixed ? *fixed : baseline_weights(train, RandomWeighting{derive_seed(seed, {1})});
        scores[k] = train_and_score(cfg, ctx, w, seed);
    });

    MethodResult out;
    bool any_ok = false;
    for (std::size_t k = 0; k < n; ++k) {
        any_ok = any_ok || !scores[k].diverged;
        out.records.push_back(RunRecord{to_string(spec.kind), ctx.repeat, 0, static_cast<int>(k), Vector(),
                                        scores[k].val_metric, scores[k].test_metric, scores[k].wall_time_s});
    }
    if (!any_ok) throw RunError(std::string("every ") + to_string(spec.kind) + " baseline training diverged");
    const std::size_t b = select_best(out.records);
    out.best = out.records[b];
    out.best_params = std::move(scores[b].params);
    return out;
}

ExperimentResult run_repeats(const ExperimentConfig& cfg, const SelectedCallback& on_selected) {
    cfg.validate();
    if (cfg.repeats < 2) throw ContractError("a summary over repeats needs repeats >= 2");
    ExperimentResult res;
    auto keep = [&](const RepeatContext& ctx, const std::string& method, const MethodResult& m) {
        res.records.insert(res.records.end(), m.records.begin(), m.records.end());
        res.selected[method].push_back(m.best);
        if (on_selected) on_selected(ctx, method, m);
    };
    for (int rep = 0; rep < cfg.repeats; ++rep) {
        const RepeatContext ctx = prepare_repeat(cfg, rep);
        if (cfg.run_moew) keep(ctx, "moew", run_moew(cfg, ctx));
        for (const auto& b : cfg.baselines) keep(ctx, to_string(b.kind), run_baseline(cfg, ctx, b));
    }
    for (const auto& [method, recs] : res.selected) {
        std::vector<double> tests;
        for (const auto& r : recs) tests.push_back(r.test_metric);
        res.summary[method] = summarize(tests);
    }
    return res;
}

} // namespace moew
