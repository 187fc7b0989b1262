// Runs every acceptance criterion and prints one pass/fail line each.
// Exit status is nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cfsl/error.hpp"
#include "cfsl/harness.hpp"

using namespace cfsl;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// ---------------------------------------------------------------- desk scale

constexpr int kTrendTasks = 50;
const std::vector<std::int64_t> kTrendSeeds{0, 1, 2};

const DatasetSplit& desk_split() {
    static const DatasetSplit s = [] {
        SplitSpec spec;
        spec.background_fraction = 100.0 / 150.0;
        return split_background_eval(synth_generate(150, 20, 28, 1), spec);
    }();
    return s;
}

LearnerSpec desk_learner(LearnerKind kind) {
    LearnerSpec s;
    s.kind = kind;
    s.filters = 16;
    s.stages = 3;
    s.lr = 0.01;
    s.fine_tune_steps = kind == LearnerKind::convnet ? 30 : 0;
    s.image_size = 28;
    return s;
}

PretrainConfig desk_pretrain() {
    PretrainConfig p;
    p.epochs = 5;
    p.iterations_per_epoch = 100;
    p.batch_size = 32;
    return p;
}

// One pretraining per (kind, seed), shared by every trend criterion.
RunOptions cached_options() {
    static std::map<std::pair<int, std::int64_t>, std::shared_ptr<Learner>> cache;
    RunOptions o;
    o.pretrain = desk_pretrain();
    o.factory = [](const LearnerSpec& spec, const ClassDataset& bg, std::int64_t seed) {
        auto& slot = cache[{static_cast<int>(spec.kind), seed}];
        if (!slot) {
            PretrainConfig cfg = desk_pretrain();
            cfg.seed = seed;
            slot = pretrain(spec, bg, cfg).learner;
        }
        return slot->clone();
    };
    return o;
}

ExperimentConfig trend(const std::string& name) {
    ExperimentConfig e = preset(name);
    e.num_tasks = kTrendTasks;
    e.seeds = kTrendSeeds;
    return e;
}

RunReport run_trend(const std::string& name, LearnerKind kind, const std::optional<ReplayConfig>& replay) {
    RunReport r = run_experiment(desk_split(), trend(name), desk_learner(kind), replay, cached_options());
    if (r.partial) throw Error(name + " run failed: " + *std::find_if(r.per_seed.begin(), r.per_seed.end(), [](auto& s) {
                                   return s.error.has_value();
                               })->error);
    return r;
}

// ---------------------------------------------------------------- criteria

Outcome criterion1() {
    struct Row {
        std::string name;
        int nss, cci, n_way, k_shot;
        TaskMode mode;
        int expected;
    };
    std::vector<Row> rows;
    // Replication rows, reported for two models with identical configurations.
    const int replication[][3] = {{4, 2, 10}, {8, 2, 20}, {3, 1, 15}, {5, 1, 25}, {10, 1, 50}};
    for (int model = 0; model < 2; ++model) {
        for (int i = 0; i < 5; ++i) {
            rows.push_back({"replication" + std::to_string(i + 1), replication[i][0], replication[i][1], 5, 2,
                            TaskMode::classification, replication[i][2]});
        }
    }
    rows.push_back({"baseline1", 4, 2, 5, 1, TaskMode::classification, 10});
    rows.push_back({"baseline2", 8, 2, 5, 1, TaskMode::classification, 20});
    rows.push_back({"wide1", 4, 2, 10, 1, TaskMode::classification, 20});
    rows.push_back({"wide2", 4, 2, 100, 1, TaskMode::classification, 200});
    rows.push_back({"deep1", 20, 2, 2, 1, TaskMode::classification, 20});
    rows.push_back({"deep2", 80, 2, 5, 1, TaskMode::classification, 200});
    const int instance[][2] = {{1, 20}, {2, 10}, {4, 5}, {10, 2}, {20, 1}};
    for (int i = 0; i < 5; ++i) {
        rows.push_back({"instance_exp" + std::to_string(i + 1), instance[i][0], instance[i][0], 1, instance[i][1],
                        TaskMode::instance, 20});
    }
    int checked = 0;
    for (const auto& row : rows) {
        const ExperimentConfig p = preset(row.name);
        if (p.nss != row.nss || p.cci != row.cci || p.n_way != row.n_way || p.k_shot != row.k_shot ||
            p.mode != row.mode) {
            return {false, row.name + " preset parameters differ from the reference row"};
        }
        const int got = derive_counts(p).label_count;
        if (got != row.expected) {
            return {false, row.name + ": count " + std::to_string(got) + ", expected " + std::to_string(row.expected)};
        }
        ++checked;
    }
    if (preset_names().size() != 16) return {false, "expected 16 named presets"};
    return {true, std::to_string(checked) + " rows exact"};
}

Outcome criterion2() {
    const ClassDataset pool = synth_generate(220, 21, 8, 3);
    const auto& names = preset_names();
    int sampled = 0;
    for (int i = 0; i < 1000; ++i) {
        const ExperimentConfig cfg = preset(names[static_cast<std::size_t>(i) % names.size()]);
        Rng rng = task_stream(i, i);
        const Task t = sample_task(pool, cfg, rng);
        const auto r = validate_task(t, cfg);
        if (!r.ok()) return {false, cfg.name + " task " + std::to_string(i) + ": " + r.violations.front()};
        ++sampled;
    }

    const ExperimentConfig cfg = preset("baseline1");
    Rng rng = task_stream(0, 0);
    const Task good = sample_task(pool, cfg, rng);
    auto has = [](const ValidationReport& r, const std::string& needle) {
        return std::any_of(r.violations.begin(), r.violations.end(),
                           [&](const std::string& v) { return v.find(needle) != std::string::npos; });
    };
    int caught = 0;
    {
        Task t = good;  // swap two labels inside block 0 for its second set
        for (auto& it : t.support_sets[1].items) it.label = it.label == 0 ? 1 : it.label == 1 ? 0 : it.label;
        caught += has(validate_task(t, cfg), "class→label binding");
    }
    {
        Task t = good;
        t.support_sets[1].items[0].sample_id = t.support_sets[0].items[0].sample_id;
        t.support_sets[1].items[0].image = t.support_sets[0].items[0].image;
        caught += has(validate_task(t, cfg), "sample reuse");
    }
    {
        Task t = good;
        t.target_set.pop_back();
        caught += has(validate_task(t, cfg), "missing target label");
    }
    return {caught == 3, std::to_string(sampled) + " tasks valid; " + std::to_string(caught) + "/3 faults caught"};
}

Outcome criterion3() {
    int cases = 0;
    for (int b = 1; b <= 6; ++b) {
        for (int len = 1; len <= 12; ++len) {
            ReplayBuffer buf(b);
            for (int i = 0; i < len; ++i) {
                SupportSet s;
                s.index = i;
                s.items.resize(1);
                stm_insert(buf, s);
            }
            std::vector<int> got, want;
            for (const auto& s : buf.slots()) got.push_back(s.index);
            for (int i = std::max(0, len - b); i < len; ++i) want.push_back(i);
            if (got != want) return {false, "b=" + std::to_string(b) + " length " + std::to_string(len)};
            ++cases;
        }
    }
    return {true, std::to_string(cases) + " cases exact"};
}

Outcome criterion4() {
    Rng rng(44);
    int predictions = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int labels = static_cast<int>(rng.uniform_int(1, 8));
        const int dim = static_cast<int>(rng.uniform_int(1, 16));
        const int items = static_cast<int>(rng.uniform_int(1, 24));
        PrototypeStore store;
        std::vector<std::pair<int, std::vector<float>>> support;
        for (int i = 0; i < items; ++i) {
            std::vector<float> e(static_cast<std::size_t>(dim));
            for (auto& v : e) v = static_cast<float>(rng.normal());
            const int label = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(labels)));
            store.add(label, e);
            support.emplace_back(label, e);
        }
        const int queries = 8;
        std::vector<float> q(static_cast<std::size_t>(queries * dim));
        for (auto& v : q) v = static_cast<float>(rng.normal());
        const Prediction p = store.classify(q, queries, labels);
        for (int i = 0; i < queries; ++i) {
            // brute force: centroid per label in double, nearest by squared distance, lowest label on ties
            int best = -1;
            double best_d = 0;
            for (int l = 0; l < labels; ++l) {
                std::vector<double> c(static_cast<std::size_t>(dim), 0.0);
                int n = 0;
                for (const auto& [lab, e] : support) {
                    if (lab != l) continue;
                    ++n;
                    for (int k = 0; k < dim; ++k) c[static_cast<std::size_t>(k)] += e[static_cast<std::size_t>(k)];
                }
                if (n == 0) continue;
                double d = 0;
                for (int k = 0; k < dim; ++k) {
                    const double diff = q[static_cast<std::size_t>(i * dim + k)] - c[static_cast<std::size_t>(k)] / n;
                    d += diff * diff;
                }
                if (best < 0 || d < best_d) {
                    best = l;
                    best_d = d;
                }
            }
            if (p.labels[static_cast<std::size_t>(i)] != best) {
                return {false, "instance " + std::to_string(trial) + " query " + std::to_string(i) + " predicted " +
                                   std::to_string(p.labels[static_cast<std::size_t>(i)]) + ", oracle " +
                                   std::to_string(best)};
            }
            ++predictions;
        }
    }
    return {true, "100 instances, " + std::to_string(predictions) + " predictions equal"};
}

Outcome criterion5() {
    LearnerSpec spec;
    spec.filters = 4;
    spec.stages = 2;
    spec.image_size = 12;
    const ClassDataset d = synth_generate(4, 2, 12, 5);
    std::vector<Image> probe;
    std::vector<int> labels;
    for (int c = 0; c < 4; ++c) {
        probe.push_back(d.classes[static_cast<std::size_t>(c)].samples[0].image);
        labels.push_back(c);
    }
    double worst = 0;
    int checked = 0;
    for (nn::BnMode mode : {nn::BnMode::batch, nn::BnMode::frozen}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            GradientCheckOptions opt;
            opt.bn_mode = mode;
            opt.seed = seed;
            opt.parameters = 128;
            const auto r = finite_difference_check(spec, probe, labels, 4, opt);
            worst = std::max(worst, r.max_relative_error);
            checked += r.checked;
        }
    }
    return {worst < 1e-4, fmt("max relative error %.3g over %.0f parameters (threshold 1e-4)", worst, checked)};
}

Outcome criterion6() {
    const RunReport plain = run_trend("instance_exp2", LearnerKind::convnet, std::nullopt);
    const RunReport replay = run_trend("instance_exp2", LearnerKind::convnet, replay_preset("instance_exp2"));
    const double gap = 100 * (replay.overall_mean - plain.overall_mean);
    return {gap >= 15.0, fmt("no replay %.2f, replay %.2f, gain %.2f points (need >= 15)", 100 * plain.overall_mean,
                             100 * replay.overall_mean, gap)};
}

Outcome criterion7() {
    const RunReport b1 = run_trend("baseline1", LearnerKind::convnet, std::nullopt);
    const RunReport b2 = run_trend("baseline2", LearnerKind::convnet, std::nullopt);
    const double gap = 100 * (b1.overall_mean - b2.overall_mean);
    return {gap >= 10.0, fmt("NC=10 %.2f, NC=20 %.2f, drop %.2f points (need >= 10)", 100 * b1.overall_mean,
                             100 * b2.overall_mean, gap)};
}

Outcome criterion8() {
    std::vector<double> means;
    std::string per;
    for (int i = 1; i <= 5; ++i) {
        const RunReport r = run_trend("instance_exp" + std::to_string(i), LearnerKind::protonet, std::nullopt);
        means.push_back(100 * r.overall_mean);
        per += (i > 1 ? " " : "") + fmt("%.2f", means.back());
    }
    const double spread = *std::max_element(means.begin(), means.end()) - *std::min_element(means.begin(), means.end());
    double mean = 0;
    for (double m : means) mean += m;
    mean /= static_cast<double>(means.size());
    return {spread <= 5.0 && mean >= 70.0,
            "per experiment [" + per + "], " + fmt("spread %.2f (need <= 5), mean %.2f (need >= 70)", spread, mean)};
}

Outcome criterion9() {
    // Full pipeline including pretraining, twice, then a worker-parallel rerun.
    ExperimentConfig e = preset("baseline1");
    e.num_tasks = 20;
    e.seeds = kTrendSeeds;
    RunOptions o;
    o.pretrain = desk_pretrain();
    o.pretrain.epochs = 2;
    const LearnerSpec spec = desk_learner(LearnerKind::convnet);
    const RunReport a = run_experiment(desk_split(), e, spec, std::nullopt, o);
    const RunReport b = run_experiment(desk_split(), e, spec, std::nullopt, o);
    o.workers = 3;
    const RunReport c = run_experiment(desk_split(), e, spec, std::nullopt, o);
    if (a.partial) return {false, "run failed"};
    int tasks = 0;
    for (std::size_t s = 0; s < a.per_seed.size(); ++s) {
        const auto& x = a.per_seed[s].per_task_accuracies;
        if (x != b.per_seed[s].per_task_accuracies) return {false, "rerun differs on seed " + std::to_string(s)};
        if (x != c.per_seed[s].per_task_accuracies) return {false, "parallel rerun differs on seed " + std::to_string(s)};
        tasks += static_cast<int>(x.size());
    }

    // Independent statistics from the raw accuracies.
    double worst = 0;
    std::vector<double> seed_means;
    for (const auto& s : a.per_seed) {
        long double m = 0;
        for (double v : s.per_task_accuracies) m += v;
        m /= s.per_task_accuracies.size();
        long double var = 0;
        for (double v : s.per_task_accuracies) var += (v - m) * (v - m);
        const double sd = static_cast<double>(std::sqrt(var / s.per_task_accuracies.size()));
        worst = std::max({worst, std::abs(static_cast<double>(m) - s.mean), std::abs(sd - s.std)});
        seed_means.push_back(static_cast<double>(m));
    }
    long double m = 0;
    for (double v : seed_means) m += v;
    m /= seed_means.size();
    long double var = 0;
    for (double v : seed_means) var += (v - m) * (v - m);
    const double sd = static_cast<double>(std::sqrt(var / seed_means.size()));
    worst = std::max({worst, std::abs(static_cast<double>(m) - a.overall_mean), std::abs(sd - a.overall_std)});
    const double tol = 4 * std::numeric_limits<double>::epsilon();
    return {worst <= tol, fmt("%.0f per-task accuracies bit-identical across 3 runs; statistics deviation %.2g "
                              "(tolerance %.2g)",
                              tasks, worst, tol)};
}

Outcome criterion10() {
    // Single checkpoint: the ensemble path must reproduce plain evaluation.
    ExperimentConfig e = trend("baseline1");
    std::string detail;
    for (const std::int64_t seed : kTrendSeeds) {
        PretrainConfig cfg = desk_pretrain();
        cfg.seed = seed;
        cfg.epochs = 2;
        const Checkpoint ckpt = pretrain(desk_learner(LearnerKind::convnet), desk_split().background, cfg)
                                    .learner->checkpoint();
        RunOptions o;
        o.factory = [&](const LearnerSpec&, const ClassDataset&, std::int64_t) { return make_learner(ckpt); };
        ExperimentConfig one = e;
        one.seeds = {seed};
        const RunReport plain = run_experiment(desk_split(), one, ckpt.spec, std::nullopt, o);
        const Checkpoint single[] = {ckpt};
        const EnsembleResult ens = ensemble_evaluate(single, desk_split().evaluation, one, seed, std::nullopt);
        if (plain.partial || ens.per_task_accuracies != plain.per_seed[0].per_task_accuracies) {
            return {false, "single-checkpoint ensemble differs from plain evaluation (seed " + std::to_string(seed) +
                               ")"};
        }
    }

    // Top five of ten per-epoch checkpoints, ranked on a held-out slice of the
    // background. Same 500 iterations as the desk schedule.
    RunOptions o;
    o.pretrain = desk_pretrain();
    o.pretrain.epochs = 10;
    o.pretrain.iterations_per_epoch = 50;
    o.ensemble = true;
    o.ensemble_size = 5;
    const RunReport r = run_experiment(desk_split(), e, desk_learner(LearnerKind::convnet), std::nullopt, o);
    if (r.partial) return {false, "ensemble run failed"};
    double ens = 0, best = 0;
    for (const auto& s : r.per_seed) {
        if (s.member_accuracies.size() != 5) return {false, "expected 5 ensemble members"};
        ens += *s.ensemble_accuracy;
        best += *std::max_element(s.member_accuracies.begin(), s.member_accuracies.end());
    }
    ens = 100 * ens / static_cast<double>(r.per_seed.size());
    best = 100 * best / static_cast<double>(r.per_seed.size());
    return {ens >= best - 2.0, fmt("single checkpoint exact on 3 seeds; 5-checkpoint ensemble %.2f vs best single "
                                   "%.2f (need >= best - 2)",
                                   ens, best)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"episode counts", criterion1},       {"label consistency", criterion2},
        {"replay FIFO", criterion3},          {"prototype oracle", criterion4},
        {"gradient check", criterion5},       {"replay benefit", criterion6},
        {"scaling degradation", criterion7},  {"protonet stability", criterion8},
        {"statistics and determinism", criterion9}, {"ensemble sanity", criterion10},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::printf("[%s] criterion %zu (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1,
                    criteria[i].first.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
