#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cfsl/dataset.hpp"
#include "cfsl/rng.hpp"

namespace cfsl {

enum class TaskMode { classification, instance };

std::string_view to_string(TaskMode mode);
TaskMode parse_task_mode(std::string_view name);

// Full parameterization of one continual few-shot experiment plus the run
// settings the harness needs.
struct ExperimentConfig {
    std::string name = "custom";  // preset name, or "custom"
    int nss = 1;                  // support sets per task
    int cci = 1;                  // class-change interval, in support sets
    int n_way = 1;                // classes per support set
    int k_shot = 1;               // samples per class per support set
    TaskMode mode = TaskMode::classification;
    int num_tasks = 100;
    std::vector<std::int64_t> seeds{0, 1, 2, 3, 4};

    // Every violated invariant, empty when valid.
    std::vector<std::string> violations() const;
    // Throws ConfigError listing every violation.
    void validate() const;

    bool operator==(const ExperimentConfig&) const = default;
};

inline constexpr int kDefaultNumTasks = 100;

struct LabelCounts {
    int label_count = 0;        // NC (classification) or NI (instance)
    int samples_per_label = 0;  // support samples per label over the task

    bool operator==(const LabelCounts&) const = default;
};

LabelCounts derive_counts(const ExperimentConfig& config);

struct LabeledItem {
    Image image;
    int label = -1;
    std::string class_id;
    std::string sample_id;
};

struct SupportSet {
    int index = 0;
    std::vector<LabeledItem> items;
};

struct Task {
    std::vector<SupportSet> support_sets;
    std::vector<LabeledItem> target_set;
    int label_count = 0;
};

// Samples one task. Support set i belongs to class block i / cci, which owns
// labels [block * n_way, (block + 1) * n_way); the class bound to a label
// never changes inside its block. Classes and samples are drawn without
// replacement. Classification targets hold one unseen sample per label;
// instance targets are the support images themselves.
Task sample_task(const ClassDataset& eval_data, const ExperimentConfig& config, Rng& rng);

// Stream of task i under master seed s is a pure function of (config, s, i).
Rng task_stream(std::int64_t seed, int task_index);

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_task(const Task& task, const ExperimentConfig& config);

// Named configurations: replication1..5, baseline1/2, wide1/2, deep1/2,
// instance_exp1..5.
ExperimentConfig preset(std::string_view name);
const std::vector<std::string>& preset_names();
bool is_preset(std::string_view name);

}  // namespace cfsl
