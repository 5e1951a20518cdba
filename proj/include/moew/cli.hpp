#pragma once

#include "moew/driver.hpp"
#include "moew/io.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace moew {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

struct RunOptions {
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    /// Writes 0 in the wall time column so reruns are byte-identical.
    bool no_timing = false;
    std::ostream* log = nullptr;
};

/// Writes runs.csv, summary.csv and models/ under opts.out. Anything written is removed on failure.
ExperimentResult cmd_run(const RunOptions& opts);

void write_runs_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records, bool timing = true);
std::vector<RunRecord> read_runs_csv(const std::filesystem::path& path);
void write_summary_csv(const std::filesystem::path& path, const std::map<std::string, Summary>& summary);

/// Everything needed to rebuild a selected model and its weighting function.
Archive selected_model_archive(const RepeatContext& ctx, const std::string& method, const MethodResult& m);

struct TrajectoryPoint {
    int batch = 0;
    double mean_best = 0.0;  // best-so-far validation metric, averaged over repeats
    int repeats = 0;
};

struct Report {
    double correlation = 0.0;
    std::size_t rows = 0;
    std::vector<TrajectoryPoint> trajectory;
};

/// Pearson correlation of val/test over rows with finite metrics (optionally one method),
/// and the best-so-far trajectory of the MOEW rows.
Report make_report(const std::vector<RunRecord>& records, const std::string& method = {});
void print_report(std::ostream& out, const Report& r);

/// Rows x1, x2, label, weight over a G x G lattice of [0,1]^2 per label value.
void cmd_weight_grid(const std::filesystem::path& model, int resolution, std::ostream& out);

/// Writes train.csv, validation.csv, test.csv and density_ratio.txt.
void cmd_toy_gen(const std::filesystem::path& out_dir, const ToySpec& spec);

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace moew
