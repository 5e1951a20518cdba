#include "moew/cli.hpp"

#include "moew/config.hpp"
#include "moew/errors.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace moew {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// runs.csv / summary.csv
// ---------------------------------------------------------------------------

void write_runs_csv(const fs::path& path, const std::vector<RunRecord>& records, bool timing) {
    Eigen::Index d = 0;
    for (const auto& r : records) d = std::max(d, r.alpha.size());
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "method,repeat,batch,candidate";
    for (Eigen::Index i = 0; i < d; ++i) out << ",alpha_" << i;
    out << ",val_metric,test_metric,wall_time_s\n";
    for (const auto& r : records) {
        out << r.method << ',' << r.repeat << ',' << r.batch << ',' << r.candidate;
        for (Eigen::Index i = 0; i < d; ++i) {
            out << ',';
            if (i < r.alpha.size()) out << format_double(r.alpha[i]);
        }
        out << ',' << format_double(r.val_metric) << ',' << format_double(r.test_metric) << ','
            << format_double(timing ? r.wall_time_s : 0.0) << '\n';
    }
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

} // namespace

std::vector<RunRecord> read_runs_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("runs file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    auto col = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("runs file lacks column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_method = col("method"), c_repeat = col("repeat"), c_batch = col("batch"),
                      c_cand = col("candidate"), c_val = col("val_metric"), c_test = col("test_metric"),
                      c_time = col("wall_time_s");
    std::vector<std::size_t> c_alpha;
    for (std::size_t i = 0;; ++i) {
        auto it = std::find(header.begin(), header.end(), "alpha_" + std::to_string(i));
        if (it == header.end()) break;
        c_alpha.push_back(static_cast<std::size_t>(it - header.begin()));
    }

    std::vector<RunRecord> out;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) throw ParseError(row, "*", "expected " + std::to_string(header.size()) + " cells");
        auto num = [&](std::size_t c) {
            try {
                return parse_double(cells[c]);
            } catch (const ContractError& e) {
                throw ParseError(row, header[c], e.what());
            }
        };
        RunRecord r;
        r.method = cells[c_method];
        r.repeat = static_cast<int>(num(c_repeat));
        r.batch = static_cast<int>(num(c_batch));
        r.candidate = static_cast<int>(num(c_cand));
        std::vector<double> alpha;
        for (auto c : c_alpha)
            if (!cells[c].empty()) alpha.push_back(num(c));
        r.alpha = Eigen::Map<Vector>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
        r.val_metric = num(c_val);
        r.test_metric = num(c_test);
        r.wall_time_s = num(c_time);
        out.push_back(std::move(r));
    }
    return out;
}

void write_summary_csv(const fs::path& path, const std::map<std::string, Summary>& summary) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "method,mean_test_metric,margin,sd,repeats\n";
    for (const auto& [method, s] : summary)
        out << method << ',' << format_double(s.mean) << ',' << format_double(s.margin) << ',' << format_double(s.sd)
            << ',' << s.n << '\n';
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

Archive selected_model_archive(const RepeatContext& ctx, const std::string& method, const MethodResult& m) {
    Archive ar;
    ar.put_text("method", method);
    ar.put("repeat", static_cast<double>(ctx.repeat));
    ar.put("val_metric", m.best.val_metric);
    ar.put("test_metric", m.best.test_metric);
    const Dataset& train = ctx.model_data.train;
    ar.put("data.dim", static_cast<double>(train.dim()));
    ar.put_text("label_kind", to_string(train.label_kind));
    ar.put("num_classes", static_cast<double>(train.num_classes));
    ar.put_text("label_transform", to_string(ctx.label_transform));
    if (ctx.standardized) save_standardizer(ar, ctx.standardizer);
    save_params(ar, "model.", m.best_params);
    if (method == "moew") {
        ar.put("alpha", m.best.alpha);
        ar.put("scale", m.best_weights.scale);
        save_embedder(ar, ctx.embedder);
        save_importance(ar, ctx.importance);
    }
    return ar;
}

namespace {

/// Removes files this run created when it does not finish.
class OutputGuard {
public:
    explicit OutputGuard(fs::path dir) : dir_(std::move(dir)) {}
    OutputGuard(const OutputGuard&) = delete;
    OutputGuard& operator=(const OutputGuard&) = delete;
    ~OutputGuard() {
        if (committed_) return;
        std::error_code ec;
        for (auto it = created_.rbegin(); it != created_.rend(); ++it) fs::remove_all(*it, ec);
    }
    fs::path track(const fs::path& p) {
        if (!fs::exists(p)) created_.push_back(p);
        return p;
    }
    void commit() { committed_ = true; }

private:
    fs::path dir_;
    std::vector<fs::path> created_;
    bool committed_ = false;
};

} // namespace

ExperimentResult cmd_run(const RunOptions& opts) {
    ExperimentConfig cfg = load_config(opts.config);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.jobs) {
        if (*opts.jobs < 1) throw ConfigError("--jobs", "must be >= 1");
        cfg.jobs = *opts.jobs;
    }
    if (cfg.repeats < 2) throw ConfigError("repeats", "a summary needs at least two repeats");
    if (opts.out.empty()) throw ConfigError("--out", "output directory required");

    OutputGuard guard(opts.out);
    if (!fs::exists(opts.out)) {
        guard.track(opts.out);
        fs::create_directories(opts.out);
    }
    const fs::path models = guard.track(opts.out / "models");
    fs::create_directories(models);

    auto on_selected = [&](const RepeatContext& ctx, const std::string& method, const MethodResult& m) {
        const fs::path file = models / (method + "_repeat" + std::to_string(ctx.repeat) + ".txt");
        selected_model_archive(ctx, method, m).save(guard.track(file));
        if (opts.log)
            *opts.log << "repeat " << ctx.repeat << ' ' << method << ": val " << format_double(m.best.val_metric)
                      << " test " << format_double(m.best.test_metric) << std::endl;
    };
    ExperimentResult res = run_repeats(cfg, on_selected);
    write_runs_csv(guard.track(opts.out / "runs.csv"), res.records, !opts.no_timing);
    write_summary_csv(guard.track(opts.out / "summary.csv"), res.summary);
    guard.commit();
    return res;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

Report make_report(const std::vector<RunRecord>& records, const std::string& method) {
    std::vector<double> val, test;
    for (const auto& r : records) {
        if (!method.empty() && r.method != method) continue;
        if (!std::isfinite(r.val_metric) || !std::isfinite(r.test_metric)) continue;
        val.push_back(r.val_metric);
        test.push_back(r.test_metric);
    }
    if (val.size() < 2) throw ContractError("report needs at least two rows with finite metrics");
    Report rep;
    rep.rows = val.size();
    rep.correlation = pearson(val, test);

    // best-so-far per (repeat, batch) over MOEW rows
    std::map<int, std::map<int, double>> best;  // repeat -> batch -> best in batch
    for (const auto& r : records) {
        if (r.method != "moew") continue;
        auto& slot = best[r.repeat];
        auto it = slot.find(r.batch);
        if (it == slot.end()) slot[r.batch] = r.val_metric;
        else it->second = std::max(it->second, r.val_metric);
    }
    std::map<int, std::pair<double, int>> sums;  // batch -> (sum, count)
    for (const auto& [rep_idx, batches] : best) {
        double running = -std::numeric_limits<double>::infinity();
        for (const auto& [b, v] : batches) {
            running = std::max(running, v);
            auto& s = sums[b];
            s.first += running;
            s.second += 1;
        }
    }
    for (const auto& [b, s] : sums) rep.trajectory.push_back({b, s.first / s.second, s.second});
    return rep;
}

void print_report(std::ostream& out, const Report& r) {
    out << "rows," << r.rows << '\n';
    out << "correlation," << format_double(r.correlation) << '\n';
    out << "batch,mean_best_so_far_val,repeats\n";
    for (const auto& t : r.trajectory) out << t.batch << ',' << format_double(t.mean_best) << ',' << t.repeats << '\n';
}

// ---------------------------------------------------------------------------
// weight-grid
// ---------------------------------------------------------------------------

void cmd_weight_grid(const fs::path& model, int resolution, std::ostream& out) {
    if (resolution < 1) throw ContractError("grid resolution must be >= 1");
    const fs::path file = fs::is_directory(model) ? model / "model.txt" : model;
    const Archive ar = Archive::load(file);
    if (!ar.has("alpha")) throw ContractError("'" + file.string() + "' holds no weighting function");
    if (static_cast<int>(ar.scalar("data.dim")) != 2) throw ContractError("weight grid needs exactly two features");
    const LabelKind lk = parse_label_kind(ar.text("label_kind"));
    if (lk == LabelKind::regression) throw ContractError("weight grid needs class labels");
    const int classes = static_cast<int>(ar.scalar("num_classes"));
    const Vector alpha = ar.vector("alpha");
    const double scale = ar.scalar("scale");
    const Embedder emb = load_embedder(ar);
    const ImportanceTable pi = load_importance(ar);
    std::optional<Standardizer> st;
    if (ar.has("standardizer.mean")) st = load_standardizer(ar);

    const auto g = static_cast<Eigen::Index>(resolution);
    Matrix X(g * g, 2);
    for (Eigen::Index i = 0; i < g; ++i)
        for (Eigen::Index j = 0; j < g; ++j) {
            X(i * g + j, 0) = g == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(g - 1);
            X(i * g + j, 1) = g == 1 ? 0.5 : static_cast<double>(j) / static_cast<double>(g - 1);
        }
    const Matrix Xs = st ? st->apply(X) : X;
    out << "x1\tx2\tlabel\tweight\n";
    for (int y = 0; y < classes; ++y) {
        const Vector labels = Vector::Constant(X.rows(), y);
        const Vector w = ExampleWeighter(emb.embed(Xs, labels), pi.evaluate(labels)).unnormalized(alpha) * scale;
        for (Eigen::Index r = 0; r < X.rows(); ++r)
            out << format_double(X(r, 0)) << '\t' << format_double(X(r, 1)) << '\t' << y << '\t' << format_double(w[r])
                << '\n';
    }
}

// ---------------------------------------------------------------------------
// toy-gen
// ---------------------------------------------------------------------------

void cmd_toy_gen(const fs::path& out_dir, const ToySpec& spec) {
    spec.validate();
    fs::create_directories(out_dir);
    const SplitData d = generate_toy(spec);
    write_csv(out_dir / "train.csv", d.train);
    write_csv(out_dir / "validation.csv", d.validation);
    write_csv(out_dir / "test.csv", d.test);
    Vector ratio(d.train.size());
    for (Eigen::Index i = 0; i < d.train.size(); ++i)
        ratio[i] = toy_density_ratio(spec, d.train.features(i, 0), d.train.features(i, 1));
    save_user_weights(out_dir / "density_ratio.txt", ratio);
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Metric-optimized example weights"};
    app.require_subcommand(1);

    RunOptions run_opts;
    run_opts.log = &err;
    std::uint64_t seed = 0;
    int jobs = 1;
    auto* run = app.add_subcommand("run", "search example weights and train baselines");
    run->add_option("--config", run_opts.config, "experiment JSON")->required();
    run->add_option("--out", run_opts.out, "output directory")->required();
    auto* seed_opt = run->add_option("--seed", seed, "override the master seed");
    auto* jobs_opt = run->add_option("--jobs", jobs, "max concurrent trainings");
    run->add_flag("--no-timing", run_opts.no_timing, "write 0 for wall times");

    std::string grid_model;
    int resolution = 21;
    std::string grid_out;
    auto* grid = app.add_subcommand("weight-grid", "weighting function over the unit square");
    grid->add_option("--model", grid_model, "selected MOEW model file")->required();
    grid->add_option("--resolution", resolution, "points per axis");
    grid->add_option("--out", grid_out, "output file (default stdout)");

    std::string runs_path, method;
    auto* report = app.add_subcommand("report", "val/test correlation and search trajectory");
    report->add_option("--runs", runs_path, "runs.csv")->required();
    report->add_option("--method", method, "restrict the correlation to one method");

    ToySpec toy;
    std::string toy_out;
    auto* toygen = app.add_subcommand("toy-gen", "write the synthetic task as CSV");
    toygen->add_option("--out", toy_out, "output directory")->required();
    toygen->add_option("--seed", toy.seed, "seed");
    toygen->add_option("--n-train", toy.n_train);
    toygen->add_option("--n-val", toy.n_val);
    toygen->add_option("--n-test", toy.n_test);
    toygen->add_option("--noise", toy.label_noise);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) {
            if (*seed_opt) run_opts.seed = seed;
            if (*jobs_opt) run_opts.jobs = jobs;
            const auto res = cmd_run(run_opts);
            for (const auto& [m, s] : res.summary)
                out << m << ": mean test " << format_double(s.mean) << " +- " << format_double(s.margin) << '\n';
        } else if (*grid) {
            if (grid_out.empty()) {
                cmd_weight_grid(grid_model, resolution, out);
            } else {
                std::ofstream f(grid_out);
                if (!f) throw Error("cannot write '" + grid_out + "'");
                cmd_weight_grid(grid_model, resolution, f);
            }
        } else if (*report) {
            print_report(out, make_report(read_runs_csv(runs_path), method));
        } else if (*toygen) {
            cmd_toy_gen(toy_out, toy);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

} // namespace moew
