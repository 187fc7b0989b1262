#include <map>
#include <set>

#include "doctest.h"
#include "cfsl/episodes.hpp"
#include "cfsl/error.hpp"

using namespace cfsl;

namespace {

// Independent restatement of the counting rules: every block of cci
// consecutive support sets introduces n_way fresh classes; in instance mode
// every support item is its own label.
int oracle_label_count(int nss, int cci, int n_way, int k_shot, bool instance) {
    if (instance) return nss * k_shot;
    int labels = 0;
    for (int s = 0; s < nss; ++s) {
        if (s % cci == 0) labels += n_way;
    }
    return labels;
}

const ClassDataset& eval_pool() {
    static const ClassDataset d = synth_generate(240, 21, 8, 5);
    return d;
}

// Random valid configuration small enough for eval_pool().
ExperimentConfig random_config(Rng& rng) {
    ExperimentConfig c;
    if (rng.uniform01() < 0.3) {
        c.mode = TaskMode::instance;
        c.nss = static_cast<int>(rng.uniform_int(1, 5));
        c.cci = c.nss;
        c.n_way = 1;
        c.k_shot = static_cast<int>(rng.uniform_int(1, 4));
    } else {
        c.cci = static_cast<int>(rng.uniform_int(1, 3));
        c.nss = c.cci * static_cast<int>(rng.uniform_int(1, 5));
        c.n_way = static_cast<int>(rng.uniform_int(1, 6));
        c.k_shot = static_cast<int>(rng.uniform_int(1, 3));
    }
    return c;
}

}  // namespace

TEST_CASE("label counts for every named preset") {
    const std::map<std::string, int> expected{
        {"replication1", 10}, {"replication2", 20}, {"replication3", 15}, {"replication4", 25},
        {"replication5", 50}, {"baseline1", 10},    {"baseline2", 20},    {"wide1", 20},
        {"wide2", 200},       {"deep1", 20},        {"deep2", 200},       {"instance_exp1", 20},
        {"instance_exp2", 20}, {"instance_exp3", 20}, {"instance_exp4", 20}, {"instance_exp5", 20}};
    CHECK(preset_names().size() == expected.size());
    for (const auto& name : preset_names()) {
        const auto c = preset(name);
        const int oracle = oracle_label_count(c.nss, c.cci, c.n_way, c.k_shot, c.mode == TaskMode::instance);
        CHECK_MESSAGE(derive_counts(c).label_count == oracle, name);
        CHECK_MESSAGE(derive_counts(c).label_count == expected.at(name), name);
    }
}

TEST_CASE("preset parameters and seed counts") {
    const auto b1 = preset("baseline1");
    CHECK(b1.nss == 4);
    CHECK(b1.cci == 2);
    CHECK(b1.n_way == 5);
    CHECK(b1.k_shot == 1);
    CHECK(b1.seeds.size() == 5);
    CHECK(preset("replication2").seeds.size() == 3);
    CHECK(preset("replication2").k_shot == 2);
    const auto i2 = preset("instance_exp2");
    CHECK(i2.mode == TaskMode::instance);
    CHECK(i2.nss == 2);
    CHECK(i2.k_shot == 10);
    CHECK(preset("deep2").nss == 80);
    CHECK_THROWS_AS(preset("baseline3"), LookupError);
    CHECK(is_preset("wide2"));
    CHECK_FALSE(is_preset("custom"));
}

TEST_CASE("config validation lists every violation") {
    ExperimentConfig c;
    c.nss = 3;
    c.cci = 2;
    c.n_way = 0;
    c.seeds.clear();
    const auto v = c.violations();
    CHECK(v.size() == 3);
    CHECK_THROWS_AS(c.validate(), ConfigError);
    ExperimentConfig inst;
    inst.mode = TaskMode::instance;
    inst.nss = 2;
    inst.cci = 1;
    inst.n_way = 2;
    CHECK(inst.violations().size() == 2);
}

TEST_CASE("property: sampled tasks satisfy every structural invariant") {
    Rng gen(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const auto cfg = random_config(gen);
        Rng rng = task_stream(trial, trial % 7);
        const Task t = sample_task(eval_pool(), cfg, rng);
        const auto report = validate_task(t, cfg);
        REQUIRE_MESSAGE(report.ok(), (report.ok() ? "" : report.violations.front()));

        const auto counts = derive_counts(cfg);
        CHECK(t.label_count == counts.label_count);
        CHECK(t.target_set.size() == static_cast<std::size_t>(counts.label_count));
        // label of set s always lies in its block
        for (std::size_t s = 0; s < t.support_sets.size(); ++s) {
            for (const auto& item : t.support_sets[s].items) {
                if (cfg.mode == TaskMode::instance) {
                    CHECK(item.label / cfg.k_shot == static_cast<int>(s));
                } else {
                    CHECK(item.label / cfg.n_way == static_cast<int>(s) / cfg.cci);
                }
            }
        }
        if (cfg.mode == TaskMode::instance) {
            std::set<std::string> classes;
            for (const auto& s : t.support_sets)
                for (const auto& item : s.items) classes.insert(item.class_id);
            CHECK(classes.size() == 1);
        }
    }
}

TEST_CASE("task streams are pure functions of (config, seed, index)") {
    const auto cfg = preset("baseline2");
    auto fingerprint = [&](std::int64_t seed, int idx) {
        Rng rng = task_stream(seed, idx);
        const Task t = sample_task(eval_pool(), cfg, rng);
        std::string s;
        for (const auto& set : t.support_sets)
            for (const auto& it : set.items) s += it.class_id + "/" + it.sample_id + ":" + std::to_string(it.label) + ";";
        for (const auto& it : t.target_set) s += it.sample_id + ";";
        return s;
    };
    CHECK(fingerprint(3, 17) == fingerprint(3, 17));
    CHECK(fingerprint(3, 17) != fingerprint(3, 18));
    CHECK(fingerprint(3, 17) != fingerprint(4, 17));
}

TEST_CASE("validate_task catches injected faults") {
    const auto cfg = preset("baseline1");
    Rng rng = task_stream(0, 0);
    const Task good = sample_task(eval_pool(), cfg, rng);
    REQUIRE(validate_task(good, cfg).ok());

    auto has = [](const ValidationReport& r, const std::string& needle) {
        for (const auto& v : r.violations)
            if (v.find(needle) != std::string::npos) return true;
        return false;
    };

    SUBCASE("label remapped within its block") {
        Task t = good;
        // second set of block 0 swaps labels 0 and 1: still inside the block range
        for (auto& item : t.support_sets[1].items) item.label = item.label == 0 ? 1 : item.label == 1 ? 0 : item.label;
        const auto r = validate_task(t, cfg);
        CHECK_FALSE(r.ok());
        CHECK(has(r, "class→label binding"));
    }
    SUBCASE("sample reused") {
        Task t = good;
        t.support_sets[1].items[0].sample_id = t.support_sets[0].items[0].sample_id;
        t.support_sets[1].items[0].image = t.support_sets[0].items[0].image;
        CHECK(has(validate_task(t, cfg), "sample reuse"));
    }
    SUBCASE("target label missing") {
        Task t = good;
        t.target_set.pop_back();
        CHECK(has(validate_task(t, cfg), "missing target label"));
    }
    SUBCASE("label outside its block") {
        Task t = good;
        t.support_sets[0].items[0].label = 7;
        CHECK_FALSE(validate_task(t, cfg).ok());
    }
}

TEST_CASE("instance targets are the support images") {
    const auto cfg = preset("instance_exp3");
    Rng rng = task_stream(1, 2);
    Task t = sample_task(eval_pool(), cfg, rng);
    REQUIRE(validate_task(t, cfg).ok());
    for (const auto& target : t.target_set) {
        const auto& src = t.support_sets[static_cast<std::size_t>(target.label / cfg.k_shot)]
                              .items[static_cast<std::size_t>(target.label % cfg.k_shot)];
        CHECK(src.image == target.image);
    }
    t.target_set[0].image = t.target_set[1].image;
    t.target_set[0].sample_id = t.target_set[1].sample_id;
    CHECK_FALSE(validate_task(t, cfg).ok());
}

TEST_CASE("sampling reports shortfalls") {
    const auto tiny = synth_generate(5, 2, 8, 0);
    Rng rng(0);
    CHECK_THROWS_AS(sample_task(tiny, preset("baseline1"), rng), SamplingError);
    CHECK_THROWS_AS(sample_task(tiny, preset("instance_exp1"), rng), SamplingError);
}
