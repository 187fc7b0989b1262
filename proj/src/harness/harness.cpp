#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "cfsl/error.hpp"
#include "cfsl/hash.hpp"
#include "cfsl/harness.hpp"

namespace cfsl {
namespace {

// Runs body(i) for i in [0, count) on up to `workers` threads. Stops handing
// out new indices after the first failure; returns the lowest failing index
// and its message, if any.
struct ParallelFailure {
    int index = -1;
    std::string message;
};

template <class Body>
ParallelFailure parallel_for(int count, int workers, Body body) {
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::mutex mu;
    ParallelFailure failure;
    auto loop = [&] {
        for (;;) {
            if (failed.load()) return;
            const int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (const std::exception& e) {
                std::lock_guard lock(mu);
                if (failure.index < 0 || i < failure.index) failure = {i, e.what()};
                failed = true;
            }
        }
    };
    const int n = std::max(1, std::min(workers, count));
    if (n == 1) {
        loop();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n; ++t) pool.emplace_back(loop);
        for (auto& t : pool) t.join();
    }
    return failure;
}

std::int64_t validation_seed(std::int64_t seed) { return seed ^ 0x76616c6964LL; }

bool steps_reduced(const ExperimentConfig& exp, const LearnerSpec& learner) {
    if (learner.kind != LearnerKind::convnet || !is_preset(exp.name)) return false;
    return learner.fine_tune_steps != learner_preset(exp.name, learner.kind).fine_tune_steps;
}

std::unique_ptr<Learner> default_factory(const LearnerSpec& spec, const ClassDataset& background, std::int64_t seed,
                                         PretrainConfig cfg) {
    cfg.seed = seed;
    return pretrain(spec, background, cfg).learner;
}

}  // namespace

double mean_of(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double population_std(std::span<const double> values) {
    if (values.empty()) return 0.0;
    const double m = mean_of(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size()));
}

void recompute_statistics(RunReport& report) {
    std::vector<double> seed_means, ensembles;
    report.partial = false;
    for (auto& s : report.per_seed) {
        s.mean = mean_of(s.per_task_accuracies);
        s.std = population_std(s.per_task_accuracies);
        if (s.error) {
            report.partial = true;
            continue;
        }
        seed_means.push_back(s.mean);
        if (s.ensemble_accuracy) ensembles.push_back(*s.ensemble_accuracy);
    }
    report.overall_mean = mean_of(seed_means);
    report.overall_std = population_std(seed_means);
    report.ensemble_accuracy.reset();
    if (!ensembles.empty()) report.ensemble_accuracy = mean_of(ensembles);
}

Task make_task(const ClassDataset& eval, const ExperimentConfig& exp, std::int64_t seed, int task_index) {
    Rng rng = task_stream(seed, task_index);
    return sample_task(eval, exp, rng);
}

Rng adapt_stream(std::int64_t seed, int task_index) {
    return Rng::derive(static_cast<std::uint64_t>(seed), {0xada7u, static_cast<std::uint64_t>(task_index)});
}

Prediction run_task(Learner& learner, const Task& task, const ExperimentConfig& exp,
                    const std::optional<ReplayConfig>& replay, Rng& adapt_rng) {
    learner.begin_task(task.label_count);
    if (replay) {
        check_replay_applicable(exp);
        ReplayBuffer buffer(replay->b);
        for (const auto& s : task.support_sets) adapt_with_replay(learner, s, buffer, *replay, adapt_rng);
    } else {
        for (const auto& s : task.support_sets) learner.adapt(s, adapt_rng);
    }
    return learner.predict(std::span<const LabeledItem>(task.target_set));
}

EnsembleResult ensemble_evaluate(std::span<const Checkpoint> checkpoints, const ClassDataset& eval,
                                 const ExperimentConfig& exp, std::int64_t seed,
                                 const std::optional<ReplayConfig>& replay, int workers) {
    if (checkpoints.empty()) throw EnsembleError("ensemble needs at least one checkpoint");
    for (const auto& c : checkpoints) {
        if (!(c.spec == checkpoints.front().spec) || c.body.size() != checkpoints.front().body.size()) {
            throw EnsembleError("ensemble checkpoints have incompatible shapes ('" + checkpoints.front().tag + "' vs '" +
                                c.tag + "')");
        }
    }
    std::vector<std::unique_ptr<Learner>> members;
    for (const auto& c : checkpoints) members.push_back(make_learner(c));

    const int n_tasks = exp.num_tasks;
    const std::size_t m = members.size();
    EnsembleResult result;
    result.per_task_accuracies.assign(static_cast<std::size_t>(n_tasks), 0.0);
    std::vector<std::vector<double>> member_acc(m, std::vector<double>(static_cast<std::size_t>(n_tasks), 0.0));

    const auto failure = parallel_for(n_tasks, workers, [&](int t) {
        const Task task = make_task(eval, exp, seed, t);
        std::vector<double> sum;
        for (std::size_t j = 0; j < m; ++j) {
            auto learner = members[j]->clone();
            Rng rng = adapt_stream(seed, t);
            const Prediction p = run_task(*learner, task, exp, replay, rng);
            member_acc[j][static_cast<std::size_t>(t)] = accuracy(p, task.target_set);
            if (sum.empty()) sum.assign(p.scores.size(), 0.0);
            // Scores carry float precision, so these sums are exact for any
            // realistic ensemble size.
            for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += p.scores[i];
        }
        for (double& v : sum) v /= static_cast<double>(m);
        Prediction combined;
        combined.label_count = task.label_count;
        combined.labels = argmax_rows(sum, static_cast<int>(task.target_set.size()), task.label_count);
        combined.scores = std::move(sum);
        result.per_task_accuracies[static_cast<std::size_t>(t)] = accuracy(combined, task.target_set);
    });
    if (failure.index >= 0) {
        throw EnsembleError("ensemble evaluation failed on task " + std::to_string(failure.index) + ": " +
                            failure.message);
    }
    result.mean = mean_of(result.per_task_accuracies);
    for (const auto& a : member_acc) result.member_means.push_back(mean_of(a));
    return result;
}

RunReport run_experiment(const DatasetSplit& split, const ExperimentConfig& exp, const LearnerSpec& learner,
                         const std::optional<ReplayConfig>& replay, const RunOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    exp.validate();
    learner.validate();
    if (replay) {
        const auto v = replay->violations();
        if (!v.empty()) throw ConfigError("invalid replay config: " + v.front());
        check_replay_applicable(exp);
        if (learner.kind != LearnerKind::convnet) throw ReplayError("replay is only defined for the convnet learner");
    }
    if (options.workers < 1) throw ConfigError("workers must be >= 1");
    if (options.ensemble && options.factory) throw ConfigError("ensembling needs the built-in pretraining path");
    if (options.ensemble && options.ensemble_size < 1) throw ConfigError("ensemble_size must be >= 1");

    // Dataset capacity does not depend on the seed; fail before pretraining.
    make_task(split.evaluation, exp, exp.seeds.front(), 0);

    RunReport report;
    report.experiment = exp;
    report.learner = learner;
    report.replay = replay;
    report.pretrain = options.pretrain;
    report.counts = derive_counts(exp);
    report.reduced_num_tasks = exp.num_tasks != kDefaultNumTasks;
    report.reduced_fine_tune_steps = steps_reduced(exp, learner);
    report.artifact_hashes["background"] = hex_digest(split.background.fingerprint());
    report.artifact_hashes["evaluation"] = hex_digest(split.evaluation.fingerprint());

    // With ensembling, part of the background is held out to rank the
    // per-epoch checkpoints.
    DatasetSplit inner;
    if (options.ensemble) {
        SplitSpec s;
        s.background_fraction = 1.0 - options.validation_fraction;
        s.seed = 0;
        inner = split_background_eval(split.background, s);
        ExperimentConfig vexp = exp;
        vexp.num_tasks = options.validation_tasks;
        try {
            make_task(inner.evaluation, vexp, validation_seed(exp.seeds.front()), 0);
        } catch (const SamplingError& e) {
            throw SamplingError(std::string("validation slice of the background is too small: ") + e.what());
        }
    }

    for (const std::int64_t seed : exp.seeds) {
        SeedResult sr;
        sr.seed = seed;
        try {
            std::unique_ptr<Learner> base;
            std::vector<Checkpoint> epochs;
            if (options.factory) {
                base = options.factory(learner, split.background, seed);
            } else if (options.ensemble) {
                PretrainConfig cfg = options.pretrain;
                cfg.seed = seed;
                auto pr = pretrain(learner, inner.background, cfg, true);
                base = std::move(pr.learner);
                epochs = std::move(pr.epoch_checkpoints);
            } else {
                base = default_factory(learner, split.background, seed, options.pretrain);
            }
            if (!base) throw LifecycleError("learner factory returned no learner");
            report.artifact_hashes["learner.seed" + std::to_string(seed)] = [&] {
                try {
                    const auto c = base->checkpoint();
                    Fnv1a h;
                    h.update(std::span<const float>(c.body));
                    return hex_digest(h.digest());
                } catch (const Error&) {
                    return std::string("none");
                }
            }();

            sr.per_task_accuracies.assign(static_cast<std::size_t>(exp.num_tasks), 0.0);
            const auto failure = parallel_for(exp.num_tasks, options.workers, [&](int t) {
                const Task task = make_task(split.evaluation, exp, seed, t);
                auto l = base->clone();
                Rng rng = adapt_stream(seed, t);
                const Prediction p = run_task(*l, task, exp, replay, rng);
                sr.per_task_accuracies[static_cast<std::size_t>(t)] = accuracy(p, task.target_set);
            });
            if (failure.index >= 0) {
                sr.per_task_accuracies.resize(static_cast<std::size_t>(failure.index));
                throw Error("task " + std::to_string(failure.index) + ": " + failure.message);
            }

            if (options.ensemble) {
                ExperimentConfig vexp = exp;
                vexp.num_tasks = options.validation_tasks;
                for (auto& c : epochs) {
                    const Checkpoint one[] = {c};
                    c.validation_score =
                        ensemble_evaluate(one, inner.evaluation, vexp, validation_seed(seed), replay, options.workers)
                            .mean;
                }
                // Best validation score first; earlier epoch wins ties.
                std::stable_sort(epochs.begin(), epochs.end(),
                                 [](const Checkpoint& a, const Checkpoint& b) {
                                     return a.validation_score > b.validation_score;
                                 });
                epochs.resize(std::min<std::size_t>(epochs.size(), static_cast<std::size_t>(options.ensemble_size)));
                const auto er = ensemble_evaluate(epochs, split.evaluation, exp, seed, replay, options.workers);
                sr.ensemble_accuracy = er.mean;
                sr.member_accuracies = er.member_means;
            }
        } catch (const std::exception& e) {
            sr.error = e.what();
        }
        report.per_seed.push_back(std::move(sr));
    }
    recompute_statistics(report);
    report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace cfsl
