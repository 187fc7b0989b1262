#include <algorithm>
#include <cmath>

#include "cfsl/error.hpp"
#include "cfsl/harness.hpp"

namespace cfsl {
namespace {

const std::vector<std::string>& known_parameters() {
    static const std::vector<std::string> names{"filters", "stages",  "lr",           "fine_tune_steps",
                                                "b",       "k",       "pretrain_epochs", "pretrain_lr"};
    return names;
}

int as_int(const std::string& name, double v) {
    if (v != std::floor(v) || std::abs(v) > 1e9) {
        throw ConfigError("sweep parameter '" + name + "' needs integer values, got " + std::to_string(v));
    }
    return static_cast<int>(v);
}

std::string point_key(const std::map<std::string, double>& point) {
    Json j = Json::object();
    for (const auto& [k, v] : point) j[k] = v;
    return j.dump();
}

}  // namespace

std::vector<std::string> SweepSpec::violations() const {
    std::vector<std::string> out;
    if (grid.empty()) out.push_back("sweep grid must not be empty");
    if (budget < 1) out.push_back("sweep budget must be >= 1");
    if (num_tasks && *num_tasks < 1) out.push_back("sweep num_tasks must be >= 1");
    const auto& names = known_parameters();
    for (const auto& [name, values] : grid) {
        if (std::find(names.begin(), names.end(), name) == names.end()) {
            out.push_back("unknown sweep parameter '" + name + "'");
        }
        if (values.empty()) out.push_back("sweep parameter '" + name + "' has no values");
    }
    return out;
}

RunSetup apply_point(const RunSetup& base, const std::map<std::string, double>& point) {
    RunSetup s = base;
    for (const auto& [name, v] : point) {
        if (name == "filters") {
            s.learner.filters = as_int(name, v);
        } else if (name == "stages") {
            s.learner.stages = as_int(name, v);
        } else if (name == "lr") {
            s.learner.lr = v;
        } else if (name == "fine_tune_steps") {
            s.learner.fine_tune_steps = as_int(name, v);
        } else if (name == "b" || name == "k") {
            if (!s.replay) throw ConfigError("sweep parameter '" + name + "' needs replay enabled in the base config");
            (name == "b" ? s.replay->b : s.replay->k) = as_int(name, v);
        } else if (name == "pretrain_epochs") {
            s.pretrain.epochs = as_int(name, v);
        } else if (name == "pretrain_lr") {
            s.pretrain.lr = v;
        } else {
            throw ConfigError("unknown sweep parameter '" + name + "'");
        }
    }
    return s;
}

SweepResult sweep(const DatasetSplit& split, const RunSetup& base, const SweepSpec& spec, RunOptions options) {
    const auto v = spec.violations();
    if (!v.empty()) {
        std::string msg = "invalid sweep:";
        for (const auto& s : v) msg += "\n  - " + s;
        throw ConfigError(msg);
    }

    // Enumerate the grid in odometer order over sorted names.
    std::vector<std::map<std::string, double>> points(1);
    for (const auto& [name, values] : spec.grid) {
        std::vector<std::map<std::string, double>> next;
        for (const auto& p : points) {
            for (double value : values) {
                auto q = p;
                q[name] = value;
                next.push_back(std::move(q));
            }
        }
        points = std::move(next);
    }

    SweepResult result;
    result.grid_size = points.size();
    if (points.size() > static_cast<std::size_t>(spec.budget)) {
        Rng rng = Rng::derive(static_cast<std::uint64_t>(spec.seed), {0x5eebu});
        auto picks = rng.choose(points.size(), static_cast<std::size_t>(spec.budget));
        std::sort(picks.begin(), picks.end());
        std::vector<std::map<std::string, double>> kept;
        for (auto i : picks) kept.push_back(points[i]);
        points = std::move(kept);
        result.subsampled = true;
    }

    for (const auto& p : points) {
        SweepEntry e;
        e.point = p;
        try {
            e.setup = apply_point(base, p);
            if (spec.num_tasks) e.setup.experiment.num_tasks = *spec.num_tasks;
            options.pretrain = e.setup.pretrain;
            const RunReport r =
                run_experiment(split, e.setup.experiment, e.setup.learner, e.setup.replay, options);
            e.mean = r.overall_mean;
            e.std = r.overall_std;
            if (r.partial) {
                for (const auto& s : r.per_seed) {
                    if (s.error) {
                        e.error = "seed " + std::to_string(s.seed) + ": " + *s.error;
                        break;
                    }
                }
            }
        } catch (const std::exception& ex) {
            e.error = ex.what();
        }
        result.leaderboard.push_back(std::move(e));
    }

    std::stable_sort(result.leaderboard.begin(), result.leaderboard.end(), [](const SweepEntry& a, const SweepEntry& b) {
        if (a.error.has_value() != b.error.has_value()) return !a.error.has_value();
        if (a.mean != b.mean) return a.mean > b.mean;
        return point_key(a.point) < point_key(b.point);
    });
    return result;
}

}  // namespace cfsl
