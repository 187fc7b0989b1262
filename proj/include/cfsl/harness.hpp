#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfsl/dataset.hpp"
#include "cfsl/episodes.hpp"
#include "cfsl/models.hpp"
#include "cfsl/replay.hpp"
#include "cfsl/serialization.hpp"

namespace cfsl {

inline constexpr int kReportSchemaVersion = 1;

struct SeedResult {
    std::int64_t seed = 0;
    std::vector<double> per_task_accuracies;
    double mean = 0.0;
    double std = 0.0;  // population std over tasks
    std::optional<std::string> error;
    std::optional<double> ensemble_accuracy;
    // Accuracy of each ensemble member evaluated alone, best-validated first.
    std::vector<double> member_accuracies;

    bool operator==(const SeedResult&) const = default;
};

struct RunReport {
    int schema_version = kReportSchemaVersion;
    ExperimentConfig experiment;
    LearnerSpec learner;
    std::optional<ReplayConfig> replay;
    PretrainConfig pretrain;
    LabelCounts counts;
    std::vector<SeedResult> per_seed;
    double overall_mean = 0.0;  // mean of per-seed means
    double overall_std = 0.0;   // population std of per-seed means
    std::optional<double> ensemble_accuracy;
    double wall_time_seconds = 0.0;
    std::map<std::string, std::string> artifact_hashes;
    bool reduced_num_tasks = false;
    bool reduced_fine_tune_steps = false;
    bool partial = false;

    bool operator==(const RunReport&) const = default;
};

// Population mean / std.
double mean_of(std::span<const double> values);
double population_std(std::span<const double> values);

// Recomputes every per-seed and overall statistic from the raw accuracies.
void recompute_statistics(RunReport& report);

// Builds a learner for one seed. The default pretrains on the background
// set; tests substitute stubs.
using LearnerFactory =
    std::function<std::unique_ptr<Learner>(const LearnerSpec& spec, const ClassDataset& background, std::int64_t seed)>;

struct RunOptions {
    PretrainConfig pretrain;  // seed is replaced by the experiment seed
    int workers = 1;          // task-level threads
    bool ensemble = false;
    int ensemble_size = 5;
    double validation_fraction = 0.2;  // background classes held out for checkpoint ranking
    int validation_tasks = 10;
    LearnerFactory factory;  // empty: pretrain
};

// Runs one task end to end with a learner that has already been pretrained.
// The learner is modified (begin_task resets its per-task state).
Prediction run_task(Learner& learner, const Task& task, const ExperimentConfig& exp,
                    const std::optional<ReplayConfig>& replay, Rng& adapt_rng);

// Task i of a seed and the matching adaptation stream.
Task make_task(const ClassDataset& eval, const ExperimentConfig& exp, std::int64_t seed, int task_index);
Rng adapt_stream(std::int64_t seed, int task_index);

RunReport run_experiment(const DatasetSplit& split, const ExperimentConfig& exp, const LearnerSpec& learner,
                         const std::optional<ReplayConfig>& replay, const RunOptions& options = {});

struct EnsembleResult {
    std::vector<double> per_task_accuracies;
    double mean = 0.0;
    std::vector<double> member_means;  // each checkpoint alone
};

// Per target, averages the members' per-label scores and takes the argmax.
// Members see identical tasks and identical adaptation streams.
EnsembleResult ensemble_evaluate(std::span<const Checkpoint> checkpoints, const ClassDataset& eval,
                                 const ExperimentConfig& exp, std::int64_t seed,
                                 const std::optional<ReplayConfig>& replay, int workers = 1);

// Full resolved setup of one run; also the unit a sweep varies.
struct RunSetup {
    ExperimentConfig experiment;
    LearnerSpec learner;
    std::optional<ReplayConfig> replay;
    PretrainConfig pretrain;

    bool operator==(const RunSetup&) const = default;
};

// Hyperparameter names: filters, stages, lr, fine_tune_steps, b, k,
// pretrain_epochs, pretrain_lr.
struct SweepSpec {
    std::map<std::string, std::vector<double>> grid;
    int budget = 1;
    std::optional<int> num_tasks;  // reduced task count for the search
    std::int64_t seed = 0;         // subsampling when the grid exceeds the budget

    std::vector<std::string> violations() const;
};

struct SweepEntry {
    std::map<std::string, double> point;
    RunSetup setup;
    double mean = 0.0;
    double std = 0.0;
    std::optional<std::string> error;
};

struct SweepResult {
    std::vector<SweepEntry> leaderboard;  // mean desc, ties by point
    bool subsampled = false;
    std::size_t grid_size = 0;
};

RunSetup apply_point(const RunSetup& base, const std::map<std::string, double>& point);

SweepResult sweep(const DatasetSplit& split, const RunSetup& base, const SweepSpec& spec, RunOptions options = {});

Json to_json(const RunReport& report);
RunReport report_from_json(const Json& j);
Json to_json(const SweepResult& result);
Json to_json(const RunSetup& setup);
RunSetup setup_from_json(const Json& j);

void persist_report(const RunReport& report, const std::filesystem::path& path);
// VersionError for a newer schema, ParseError (with offset) for corrupt text.
RunReport load_report(const std::filesystem::path& path);

}  // namespace cfsl
