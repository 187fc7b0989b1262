#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "cfsl/episodes.hpp"
#include "cfsl/error.hpp"

namespace cfsl {

std::string_view to_string(TaskMode mode) {
    return mode == TaskMode::instance ? "instance" : "classification";
}

TaskMode parse_task_mode(std::string_view name) {
    if (name == "classification") return TaskMode::classification;
    if (name == "instance") return TaskMode::instance;
    throw ConfigError("unknown mode '" + std::string(name) + "' (expected classification or instance)");
}

std::vector<std::string> ExperimentConfig::violations() const {
    std::vector<std::string> out;
    auto positive = [&](int v, const char* field) {
        if (v < 1) out.push_back(std::string(field) + " must be >= 1, got " + std::to_string(v));
    };
    positive(nss, "nss");
    positive(cci, "cci");
    positive(n_way, "n_way");
    positive(k_shot, "k_shot");
    positive(num_tasks, "num_tasks");
    if (seeds.empty()) out.push_back("seeds must not be empty");
    if (nss >= 1 && cci >= 1 && nss % cci != 0) {
        out.push_back("cci (" + std::to_string(cci) + ") must divide nss (" + std::to_string(nss) + ")");
    }
    if (mode == TaskMode::instance) {
        if (n_way != 1) out.push_back("instance mode requires n_way = 1");
        if (cci != nss) out.push_back("instance mode requires cci = nss");
    }
    return out;
}

void ExperimentConfig::validate() const {
    const auto v = violations();
    if (v.empty()) return;
    std::string msg = "invalid experiment config '" + name + "':";
    for (const auto& s : v) msg += "\n  - " + s;
    throw ConfigError(msg);
}

LabelCounts derive_counts(const ExperimentConfig& config) {
    config.validate();
    if (config.mode == TaskMode::instance) return {config.nss * config.k_shot, 1};
    return {config.n_way * config.nss / config.cci, config.cci * config.k_shot};
}

Rng task_stream(std::int64_t seed, int task_index) {
    return Rng::derive(static_cast<std::uint64_t>(seed), {0x7a5cu, static_cast<std::uint64_t>(task_index)});
}

namespace {

LabeledItem make_item(const ClassRecord& cls, std::size_t sample, int label) {
    return {cls.samples[sample].image, label, cls.class_id, cls.samples[sample].sample_id};
}

Task sample_classification(const ClassDataset& data, const ExperimentConfig& cfg, Rng& rng) {
    const LabelCounts counts = derive_counts(cfg);
    const std::size_t needed = static_cast<std::size_t>(counts.samples_per_label) + 1;  // + target

    std::vector<std::size_t> eligible;
    for (std::size_t c = 0; c < data.classes.size(); ++c) {
        if (data.classes[c].samples.size() >= needed) eligible.push_back(c);
    }
    if (eligible.size() < static_cast<std::size_t>(counts.label_count)) {
        throw SamplingError("task needs " + std::to_string(counts.label_count) + " classes with >= " +
                            std::to_string(needed) + " samples each, dataset has " + std::to_string(eligible.size()) +
                            " (short by " + std::to_string(counts.label_count - static_cast<int>(eligible.size())) + ")");
    }

    const auto picks = rng.choose(eligible.size(), static_cast<std::size_t>(counts.label_count));
    Task task;
    task.label_count = counts.label_count;
    task.support_sets.resize(static_cast<std::size_t>(cfg.nss));
    for (int s = 0; s < cfg.nss; ++s) task.support_sets[s].index = s;
    task.target_set.reserve(static_cast<std::size_t>(counts.label_count));

    for (int label = 0; label < counts.label_count; ++label) {
        const ClassRecord& cls = data.classes[eligible[picks[static_cast<std::size_t>(label)]]];
        const auto samples = rng.choose(cls.samples.size(), needed);
        const int block = label / cfg.n_way;
        for (int rep = 0; rep < cfg.cci; ++rep) {
            auto& set = task.support_sets[static_cast<std::size_t>(block * cfg.cci + rep)];
            for (int shot = 0; shot < cfg.k_shot; ++shot) {
                set.items.push_back(make_item(cls, samples[static_cast<std::size_t>(rep * cfg.k_shot + shot)], label));
            }
        }
        task.target_set.push_back(make_item(cls, samples.back(), label));
    }
    return task;
}

Task sample_instance(const ClassDataset& data, const ExperimentConfig& cfg, Rng& rng) {
    const LabelCounts counts = derive_counts(cfg);
    const auto needed = static_cast<std::size_t>(counts.label_count);
    std::vector<std::size_t> eligible;
    for (std::size_t c = 0; c < data.classes.size(); ++c) {
        if (data.classes[c].samples.size() >= needed) eligible.push_back(c);
    }
    if (eligible.empty()) {
        throw SamplingError("instance task needs one class with >= " + std::to_string(needed) +
                            " samples, dataset has none");
    }
    const ClassRecord& cls = data.classes[eligible[rng.uniform_index(eligible.size())]];
    const auto samples = rng.choose(cls.samples.size(), needed);

    Task task;
    task.label_count = counts.label_count;
    task.support_sets.resize(static_cast<std::size_t>(cfg.nss));
    for (int s = 0; s < cfg.nss; ++s) {
        task.support_sets[s].index = s;
        for (int shot = 0; shot < cfg.k_shot; ++shot) {
            const int label = s * cfg.k_shot + shot;
            task.support_sets[s].items.push_back(make_item(cls, samples[static_cast<std::size_t>(label)], label));
        }
    }
    for (int label = 0; label < counts.label_count; ++label) {
        task.target_set.push_back(make_item(cls, samples[static_cast<std::size_t>(label)], label));
    }
    return task;
}

}  // namespace

Task sample_task(const ClassDataset& eval_data, const ExperimentConfig& config, Rng& rng) {
    config.validate();
    return config.mode == TaskMode::instance ? sample_instance(eval_data, config, rng)
                                             : sample_classification(eval_data, config, rng);
}

ValidationReport validate_task(const Task& task, const ExperimentConfig& config) {
    ValidationReport report;
    auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };

    const auto config_problems = config.violations();
    if (!config_problems.empty()) {
        for (const auto& p : config_problems) fail("config: " + p);
        return report;
    }
    const LabelCounts counts = derive_counts(config);
    const bool instance = config.mode == TaskMode::instance;

    if (task.label_count != counts.label_count) {
        fail("label count " + std::to_string(task.label_count) + " != expected " + std::to_string(counts.label_count));
    }
    if (task.support_sets.size() != static_cast<std::size_t>(config.nss)) {
        fail("support set count " + std::to_string(task.support_sets.size()) + " != nss " + std::to_string(config.nss));
    }

    std::map<int, std::string> label_class;        // label -> class_id
    std::map<std::string, int> class_label;        // class_id -> label
    std::map<int, std::vector<int>> label_sets;    // label -> support-set indices
    std::map<std::pair<std::string, std::string>, int> seen;  // (class, sample) -> label
    std::map<int, const LabeledItem*> support_item;            // instance: label -> its item
    std::set<std::string> classes_used;
    bool binding_reported = false, reuse_reported = false, range_reported = false;

    auto bind = [&](const LabeledItem& item) {
        auto [lit, lnew] = label_class.emplace(item.label, item.class_id);
        auto [cit, cnew] = class_label.emplace(item.class_id, item.label);
        const bool clash = (!lnew && lit->second != item.class_id) || (!instance && !cnew && cit->second != item.label);
        if (clash && !binding_reported) {
            fail("inconsistent class→label binding: label " + std::to_string(item.label) + " / class '" + item.class_id + "'");
            binding_reported = true;
        }
    };

    for (std::size_t s = 0; s < task.support_sets.size(); ++s) {
        const SupportSet& set = task.support_sets[s];
        if (set.index != static_cast<int>(s)) fail("support set " + std::to_string(s) + " carries index " + std::to_string(set.index));
        const auto expected_size = static_cast<std::size_t>(config.n_way * config.k_shot);
        if (set.items.size() != expected_size) {
            fail("support set " + std::to_string(s) + " has " + std::to_string(set.items.size()) + " items, expected " +
                 std::to_string(expected_size));
        }
        const int block = static_cast<int>(s) / config.cci;
        const int lo = instance ? static_cast<int>(s) * config.k_shot : block * config.n_way;
        const int hi = instance ? lo + config.k_shot : lo + config.n_way;
        std::map<int, int> per_label;
        for (const auto& item : set.items) {
            if (item.label < lo || item.label >= hi) {
                if (!range_reported) {
                    fail("label " + std::to_string(item.label) + " in support set " + std::to_string(s) +
                         " is outside its block range [" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
                    range_reported = true;
                }
            }
            ++per_label[item.label];
            bind(item);
            classes_used.insert(item.class_id);
            if (!seen.emplace(std::make_pair(item.class_id, item.sample_id), item.label).second && !reuse_reported) {
                fail("sample reuse: '" + item.class_id + "/" + item.sample_id + "' appears more than once");
                reuse_reported = true;
            }
            if (instance) support_item[item.label] = &item;
        }
        for (const auto& [label, n] : per_label) {
            label_sets[label].push_back(static_cast<int>(s));
            const int expected = instance ? 1 : config.k_shot;
            if (n != expected) {
                fail("label " + std::to_string(label) + " has " + std::to_string(n) + " samples in support set " +
                     std::to_string(s) + ", expected " + std::to_string(expected));
            }
        }
    }

    if (static_cast<int>(label_sets.size()) != counts.label_count) {
        fail(std::to_string(label_sets.size()) + " distinct support labels, expected " + std::to_string(counts.label_count));
    }
    for (const auto& [label, sets] : label_sets) {
        if (label < 0 || label >= counts.label_count) fail("label " + std::to_string(label) + " out of range");
        const int expected_sets = instance ? 1 : config.cci;
        bool consecutive = true;
        for (std::size_t i = 1; i < sets.size(); ++i) consecutive = consecutive && sets[i] == sets[i - 1] + 1;
        if (static_cast<int>(sets.size()) != expected_sets || !consecutive) {
            fail("label " + std::to_string(label) + " appears in " + std::to_string(sets.size()) +
                 " support sets, expected " + std::to_string(expected_sets) + " consecutive");
        }
    }
    if (instance && classes_used.size() > 1) fail("instance task draws from " + std::to_string(classes_used.size()) + " classes");

    std::map<int, int> target_labels;
    for (const auto& item : task.target_set) {
        ++target_labels[item.label];
        auto lit = label_class.find(item.label);
        if (lit == label_class.end()) {
            fail("target label " + std::to_string(item.label) + " never appears in a support set");
            continue;
        }
        if (lit->second != item.class_id && !binding_reported) {
            fail("inconsistent class→label binding: target label " + std::to_string(item.label) + " / class '" +
                 item.class_id + "'");
            binding_reported = true;
        }
        const auto key = std::make_pair(item.class_id, item.sample_id);
        if (instance) {
            auto sit = support_item.find(item.label);
            if (sit == support_item.end() || sit->second->sample_id != item.sample_id ||
                !(sit->second->image == item.image)) {
                fail("instance target for label " + std::to_string(item.label) + " is not its support image");
            }
        } else if (!seen.emplace(key, item.label).second && !reuse_reported) {
            fail("sample reuse: target '" + item.class_id + "/" + item.sample_id + "' was already used");
            reuse_reported = true;
        }
    }
    for (int label = 0; label < counts.label_count; ++label) {
        auto it = target_labels.find(label);
        if (it == target_labels.end()) {
            fail("missing target label " + std::to_string(label));
        } else if (it->second != 1) {
            fail("target label " + std::to_string(label) + " appears " + std::to_string(it->second) + " times");
        }
    }
    return report;
}

namespace {

struct PresetRow {
    const char* name;
    int nss, cci, n_way, k_shot;
    TaskMode mode;
    int seeds;
};

// Replication rows were reported over 3 seeds, everything else over 5.
constexpr PresetRow kPresets[] = {
    {"replication1", 4, 2, 5, 2, TaskMode::classification, 3},
    {"replication2", 8, 2, 5, 2, TaskMode::classification, 3},
    {"replication3", 3, 1, 5, 2, TaskMode::classification, 3},
    {"replication4", 5, 1, 5, 2, TaskMode::classification, 3},
    {"replication5", 10, 1, 5, 2, TaskMode::classification, 3},
    {"baseline1", 4, 2, 5, 1, TaskMode::classification, 5},
    {"baseline2", 8, 2, 5, 1, TaskMode::classification, 5},
    {"wide1", 4, 2, 10, 1, TaskMode::classification, 5},
    {"wide2", 4, 2, 100, 1, TaskMode::classification, 5},
    {"deep1", 20, 2, 2, 1, TaskMode::classification, 5},
    {"deep2", 80, 2, 5, 1, TaskMode::classification, 5},
    {"instance_exp1", 1, 1, 1, 20, TaskMode::instance, 5},
    {"instance_exp2", 2, 2, 1, 10, TaskMode::instance, 5},
    {"instance_exp3", 4, 4, 1, 5, TaskMode::instance, 5},
    {"instance_exp4", 10, 10, 1, 2, TaskMode::instance, 5},
    {"instance_exp5", 20, 20, 1, 1, TaskMode::instance, 5},
};

}  // namespace

ExperimentConfig preset(std::string_view name) {
    for (const auto& row : kPresets) {
        if (name != row.name) continue;
        ExperimentConfig cfg;
        cfg.name = row.name;
        cfg.nss = row.nss;
        cfg.cci = row.cci;
        cfg.n_way = row.n_way;
        cfg.k_shot = row.k_shot;
        cfg.mode = row.mode;
        cfg.num_tasks = kDefaultNumTasks;
        cfg.seeds.clear();
        for (int s = 0; s < row.seeds; ++s) cfg.seeds.push_back(s);
        return cfg;
    }
    throw LookupError("unknown preset '" + std::string(name) + "'");
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& row : kPresets) out.emplace_back(row.name);
        return out;
    }();
    return names;
}

bool is_preset(std::string_view name) {
    const auto& names = preset_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

}  // namespace cfsl
