#pragma once

// Config-file driven front end. Every command reads and validates all of
// its inputs before writing anything, and writes its outputs only after the
// work has succeeded.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cfsl/dataset.hpp"
#include "cfsl/harness.hpp"

namespace cfsl::cli {

struct SyntheticParams {
    int classes = 150;
    int samples = 20;
    std::int64_t seed = 0;

    bool operator==(const SyntheticParams&) const = default;
};

struct DatasetSection {
    std::optional<std::filesystem::path> path;      // class-folder tree
    std::optional<std::filesystem::path> manifest;  // written by `prepare`
    std::optional<SyntheticParams> synthetic;
    int image_size = 28;
    SplitSpec split;
};

struct RunConfigFile {
    DatasetSection dataset;
    RunSetup setup;
    bool ensemble = false;
    int ensemble_size = 5;
    double validation_fraction = 0.2;
    int validation_tasks = 10;
    int workers = 1;
    std::string kernels = "auto";
    std::filesystem::path output_directory;
};

// Relative paths resolve against base_dir. Throws ConfigError listing every
// problem found.
RunConfigFile parse_run_config(const Json& j, const std::filesystem::path& base_dir);
RunConfigFile load_run_config(const std::filesystem::path& path);

// Every field explicit, presets expanded, paths absolute. Parses back to an
// equivalent config.
Json resolved_config(const RunConfigFile& config);

DatasetSplit load_dataset(const DatasetSection& dataset);

RunOptions run_options(const RunConfigFile& config);

// "NC=10" or "NI=20".
std::string count_label(const RunReport& report);
// One line in the tables' style: percent, two decimals, "mean ± std".
std::string summary_line(const RunReport& report);

struct PrepareArgs {
    std::optional<SyntheticParams> synthetic;
    std::optional<std::filesystem::path> root;
    double split = 0.8;
    std::int64_t split_seed = 0;
    int image_size = 28;
    std::filesystem::path out = "prepared";
};

// key=value tokens of `prepare --synthetic`; `out` sets args.out.
void apply_synthetic_tokens(const std::vector<std::string>& tokens, PrepareArgs& args);

int cmd_prepare(const PrepareArgs& args, std::ostream& out, std::ostream& err);
int cmd_run(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);
int cmd_sweep(const std::filesystem::path& config_path, const std::filesystem::path& grid_path, std::ostream& out,
              std::ostream& err);
// Writes the first `count` tasks of every configured seed, one manifest
// record per line.
int cmd_tasks(const std::filesystem::path& config_path, int count, const std::filesystem::path& out_path,
              std::ostream& out, std::ostream& err);
int cmd_report(const std::vector<std::filesystem::path>& reports, const std::filesystem::path& out_dir,
               std::ostream& out, std::ostream& err);

// Grouped bar chart: one group per experiment row, one bar per model
// column, error bars of one std.
struct ChartSeries {
    std::string name;
    std::vector<std::optional<double>> means;  // per group, percent
    std::vector<std::optional<double>> stds;
};
std::string render_svg(const std::vector<std::string>& groups, const std::vector<ChartSeries>& series,
                       const std::string& title);
void write_png_chart(const std::vector<std::string>& groups, const std::vector<ChartSeries>& series,
                     const std::string& title, const std::filesystem::path& path);

}  // namespace cfsl::cli
