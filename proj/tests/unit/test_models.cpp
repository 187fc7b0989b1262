#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "doctest.h"
#include "helpers.hpp"
#include "cfsl/error.hpp"
#include "cfsl/models.hpp"

using namespace cfsl;

namespace {

LearnerSpec tiny(LearnerKind kind) {
    LearnerSpec s;
    s.kind = kind;
    s.filters = 4;
    s.stages = 2;
    s.image_size = 12;
    s.fine_tune_steps = 5;
    s.lr = 0.05;
    return s;
}

PretrainConfig quick_pretrain() {
    PretrainConfig p;
    p.epochs = 2;
    p.iterations_per_epoch = 4;
    p.batch_size = 8;
    p.episode_way = 5;
    return p;
}

const ClassDataset& background() {
    static const ClassDataset d = synth_generate(12, 6, 12, 11);
    return d;
}

SupportSet make_set(const ClassDataset& d, std::initializer_list<std::pair<int, int>> class_label, int shots) {
    SupportSet s;
    for (auto [c, label] : class_label) {
        for (int k = 0; k < shots; ++k) {
            const auto& smp = d.classes[static_cast<std::size_t>(c)].samples[static_cast<std::size_t>(k)];
            s.items.push_back({smp.image, label, d.classes[static_cast<std::size_t>(c)].class_id, smp.sample_id});
        }
    }
    return s;
}

}  // namespace

TEST_CASE("argmax breaks ties toward the smallest label and skips -inf") {
    const double inf = std::numeric_limits<double>::infinity();
    const std::vector<double> s{1, 3, 3, -inf, -inf, -inf, -inf, 2, -inf};
    CHECK(argmax_rows(s, 3, 3) == std::vector<int>{1, 0, 1});
}

TEST_CASE("learner presets carry the reference hyperparameters") {
    const auto b1 = learner_preset("baseline1", LearnerKind::convnet);
    CHECK(b1.filters == 512);
    CHECK(b1.stages == 3);
    CHECK(b1.lr == 0.01);
    CHECK(b1.fine_tune_steps == 120);
    CHECK(learner_preset("baseline2", LearnerKind::convnet).filters == 128);
    CHECK(learner_preset("wide2", LearnerKind::convnet).stages == 2);
    CHECK(learner_preset("deep1", LearnerKind::convnet).fine_tune_steps == 5);
    CHECK(learner_preset("instance_exp2", LearnerKind::convnet).fine_tune_steps == 120);
    CHECK(learner_preset("instance_exp4", LearnerKind::convnet).fine_tune_steps == 60);
    CHECK(learner_preset("instance_exp5", LearnerKind::convnet).fine_tune_steps == 30);
    CHECK(learner_preset("baseline1", LearnerKind::protonet).fine_tune_steps == 0);
    CHECK_THROWS_AS(learner_preset("nope", LearnerKind::convnet), LookupError);
    CHECK(parse_learner_kind("vgg") == LearnerKind::convnet);
    CHECK(parse_learner_kind("protonets") == LearnerKind::protonet);
}

TEST_CASE("spec validation") {
    LearnerSpec s;
    s.filters = 0;
    s.lr = -1;
    CHECK(s.violations().size() == 2);
    LearnerSpec deep;
    deep.stages = 6;
    CHECK_THROWS_AS(deep.validate(), ConfigError);
    CHECK(tiny(LearnerKind::convnet).output_dim(7) == 7);
    CHECK(tiny(LearnerKind::protonet).output_dim(7) == 4 * 3 * 3);
}

TEST_CASE("prototype store agrees with brute-force nearest centroid") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const int labels = static_cast<int>(rng.uniform_int(1, 8));
        const int dim = static_cast<int>(rng.uniform_int(1, 16));
        PrototypeStore store;
        std::map<int, std::vector<std::vector<float>>> members;
        const int items = static_cast<int>(rng.uniform_int(1, 20));
        for (int i = 0; i < items; ++i) {
            const int label = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(labels)));
            std::vector<float> e(static_cast<std::size_t>(dim));
            for (auto& v : e) v = static_cast<float>(rng.normal());
            store.add(label, e);
            members[label].push_back(e);
        }
        const int n = 5;
        std::vector<float> q(static_cast<std::size_t>(n * dim));
        for (auto& v : q) v = static_cast<float>(rng.normal());
        const auto pred = store.classify(q, n, labels);
        for (int i = 0; i < n; ++i) {
            int best = -1;
            double best_d = 0;
            for (const auto& [label, embs] : members) {
                double d = 0;
                for (int k = 0; k < dim; ++k) {
                    double mean = 0;
                    for (const auto& e : embs) mean += e[static_cast<std::size_t>(k)];
                    mean /= static_cast<double>(embs.size());
                    const double diff = q[static_cast<std::size_t>(i * dim + k)] - mean;
                    d += diff * diff;
                }
                if (best < 0 || d < best_d) {
                    best = label;
                    best_d = d;
                }
            }
            CHECK(pred.labels[static_cast<std::size_t>(i)] == best);
        }
    }
    PrototypeStore empty;
    std::vector<float> q(3);
    CHECK_THROWS_AS(empty.classify(q, 1, 2), InferenceError);
}

TEST_CASE("convnet learner lifecycle") {
    ConvNetLearner fresh(tiny(LearnerKind::convnet), 0);
    CHECK_FALSE(fresh.pretrained());
    CHECK_THROWS_AS(fresh.begin_task(3), LifecycleError);

    auto pr = pretrain(tiny(LearnerKind::convnet), background(), quick_pretrain());
    auto& l = *pr.learner;
    CHECK(l.pretrained());
    CHECK(pr.epoch_losses.size() == 2);
    const auto set = make_set(background(), {{0, 0}, {1, 1}, {2, 2}}, 2);
    Rng rng(0);
    CHECK_THROWS_AS(l.adapt(set, rng), LifecycleError);

    l.begin_task(3);
    const auto p0 = l.predict(std::span<const LabeledItem>(set.items));
    for (double s : p0.scores) CHECK(s == doctest::Approx(1.0 / 3.0));  // zero head
    l.adapt(set, rng);
    auto& conv = dynamic_cast<ConvNetLearner&>(l);
    const auto& losses = conv.last_fine_tune_losses();
    REQUIRE(losses.size() == 5);
    CHECK(losses.back() < losses.front());

    // begin_task restores the pretrained body exactly
    const auto h = conv.network().body_hash();
    l.begin_task(3);
    CHECK(conv.network().body_hash() != h);
    auto again = pr.learner->clone();
    again->begin_task(3);
    again->adapt(set, rng);
    CHECK(dynamic_cast<ConvNetLearner&>(*again).network().body_hash() == h);

    auto bad = set;
    bad.items[0].label = 9;
    CHECK_THROWS_AS(l.adapt(bad, rng), ConfigError);
}

TEST_CASE("protonet learner classifies its own support images") {
    auto pr = pretrain(tiny(LearnerKind::protonet), background(), quick_pretrain());
    auto& l = *pr.learner;
    l.begin_task(3);
    CHECK_THROWS_AS(l.predict(std::span<const LabeledItem>{}), InferenceError);
    const auto set = make_set(background(), {{3, 0}, {4, 1}, {5, 2}}, 1);
    Rng rng(0);
    l.adapt(set, rng);
    const auto p = l.predict(std::span<const LabeledItem>(set.items));
    CHECK(accuracy(p, set.items) == 1.0);
    CHECK_FALSE(l.supports_replay());
    CHECK_THROWS_AS(l.fine_tune(set.items, ExtraItems{}, rng), ReplayError);
}

TEST_CASE("pretraining is deterministic and keeps per-epoch checkpoints") {
    auto a = pretrain(tiny(LearnerKind::convnet), background(), quick_pretrain(), true);
    auto b = pretrain(tiny(LearnerKind::convnet), background(), quick_pretrain(), true);
    CHECK(a.epoch_losses == b.epoch_losses);
    REQUIRE(a.epoch_checkpoints.size() == 2);
    CHECK(a.epoch_checkpoints[1].tag == "epoch2");
    CHECK(a.epoch_checkpoints[1].body == a.learner->checkpoint().body);
    CHECK(a.epoch_checkpoints[0].body != a.epoch_checkpoints[1].body);

    auto poisoned = background();
    for (auto& c : poisoned.classes)
        for (auto& smp : c.samples) smp.image.pixels[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(pretrain(tiny(LearnerKind::convnet), poisoned, quick_pretrain()), DivergenceError);
    LearnerSpec wrong = tiny(LearnerKind::convnet);
    wrong.image_size = 16;
    CHECK_THROWS_AS(pretrain(wrong, background(), quick_pretrain()), ConfigError);
}

TEST_CASE("checkpoints round-trip and rebuild identical learners") {
    test::TempDir dir("ckpt");
    for (LearnerKind kind : {LearnerKind::convnet, LearnerKind::protonet}) {
        auto pr = pretrain(tiny(kind), background(), quick_pretrain());
        auto ckpt = pr.learner->checkpoint();
        ckpt.tag = "final";
        ckpt.validation_score = 0.625;
        const auto path = dir / "model.ckpt";
        save_checkpoint(ckpt, path);
        const auto back = load_checkpoint(path);
        CHECK(back.spec == ckpt.spec);
        CHECK(back.body == ckpt.body);
        CHECK(back.tag == "final");
        CHECK(back.validation_score == 0.625);

        auto rebuilt = make_learner(back);
        const auto set = make_set(background(), {{0, 0}, {1, 1}}, 2);
        Rng r1(4), r2(4);
        pr.learner->begin_task(2);
        rebuilt->begin_task(2);
        pr.learner->adapt(set, r1);
        rebuilt->adapt(set, r2);
        const auto pa = pr.learner->predict(std::span<const LabeledItem>(set.items));
        const auto pb = rebuilt->predict(std::span<const LabeledItem>(set.items));
        CHECK(pa.scores == pb.scores);
    }
}

TEST_CASE("checkpoint corruption and future versions are reported") {
    test::TempDir dir("ckpt_bad");
    auto pr = pretrain(tiny(LearnerKind::convnet), background(), quick_pretrain());
    const auto path = dir / "m.ckpt";
    save_checkpoint(pr.learner->checkpoint(), path);
    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto write = [&](const std::string& b) { std::ofstream(path, std::ios::binary | std::ios::trunc) << b; };

    auto future = bytes;
    future[8] = 2;  // version field, little endian
    write(future);
    CHECK_THROWS_AS(load_checkpoint(path), VersionError);

    write(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);

    auto flipped = bytes;
    flipped[flipped.size() - 2] ^= 0x40;
    write(flipped);
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);

    write("garbage");
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
}

TEST_CASE("prototype store: running means, translation invariance, forced outcome") {
    PrototypeStore store;
    store.add(3, std::vector<float>{1, 0});
    store.add(3, std::vector<float>{3, 2});
    store.add(3, std::vector<float>{0, 4});
    store.add(3, std::vector<float>{4, 6});
    CHECK(store.count(3) == 4);
    CHECK(store.prototype(3) == std::vector<float>{2, 3});
    const std::vector<float> q{100, -50, 0, 0, -7, 9};
    for (int l : store.classify(q, 3, 5).labels) CHECK(l == 3);

    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const int dim = 6, labels = 4;
        PrototypeStore a, b;
        std::vector<float> shift(dim);
        for (auto& v : shift) v = static_cast<float>(rng.uniform_int(-8, 8));
        for (int i = 0; i < 10; ++i) {
            std::vector<float> e(dim), s(dim);
            // dyadic values keep the shifted sums exact
            for (int k = 0; k < dim; ++k) {
                e[k] = static_cast<float>(rng.uniform_int(-16, 16)) / 4.0f;
                s[k] = e[k] + shift[k];
            }
            const int label = i % labels;
            a.add(label, e);
            b.add(label, s);
        }
        std::vector<float> qa(3 * dim), qb(3 * dim);
        for (int k = 0; k < 3 * dim; ++k) {
            qa[k] = static_cast<float>(rng.uniform_int(-16, 16)) / 4.0f;
            qb[k] = qa[k] + shift[k % dim];
        }
        CHECK(a.classify(qa, 3, labels).labels == b.classify(qb, 3, labels).labels);
    }
}

TEST_CASE("protonet weights never change during tasks") {
    auto pr = pretrain(tiny(LearnerKind::protonet), background(), quick_pretrain());
    auto& l = dynamic_cast<ProtoNetLearner&>(*pr.learner);
    const auto before = l.network().body_hash();
    Rng rng(1);
    for (int task = 0; task < 3; ++task) {
        l.begin_task(4);
        CHECK(l.prototypes().size() == 0);
        l.adapt(make_set(background(), {{0, 0}, {1, 1}}, 2), rng);
        l.adapt(make_set(background(), {{2, 2}, {3, 3}}, 2), rng);
        const auto set = make_set(background(), {{0, 0}}, 3);
        l.predict(std::span<const LabeledItem>(set.items));
        CHECK(l.prototypes().size() == 4);
    }
    CHECK(l.network().body_hash() == before);

    // two support sets each holding label 3 twice: prototype is the mean of all four embeddings
    l.begin_task(4);
    SupportSet s1 = make_set(background(), {{5, 3}}, 2), s2 = make_set(background(), {{6, 3}}, 2);
    l.adapt(s1, rng);
    l.adapt(s2, rng);
    std::vector<const Image*> imgs{&s1.items[0].image, &s1.items[1].image, &s2.items[0].image, &s2.items[1].image};
    const auto e = l.embed(imgs);
    const std::size_t d = e.size() / 4;
    const auto proto = l.prototypes().prototype(3);
    for (std::size_t k = 0; k < d; ++k) {
        const double m = (static_cast<double>(e[k]) + e[d + k] + e[2 * d + k] + e[3 * d + k]) / 4;
        CHECK(proto[k] == doctest::Approx(m).epsilon(1e-6));
    }
    const auto all = make_set(background(), {{0, 0}, {1, 1}, {2, 2}}, 1);
    for (int label : l.predict(std::span<const LabeledItem>(all.items)).labels) CHECK(label == 3);
}

TEST_CASE("convnet tasks are isolated and begin_task is idempotent") {
    auto pr = pretrain(tiny(LearnerKind::convnet), background(), quick_pretrain());
    auto& l = dynamic_cast<ConvNetLearner&>(*pr.learner);
    const auto snapshot = l.network().body_state();
    const auto set = make_set(background(), {{0, 0}, {1, 1}, {2, 2}}, 2);
    std::vector<double> first;
    for (int run = 0; run < 2; ++run) {
        l.begin_task(3);
        CHECK(l.network().body_state() == snapshot);
        CHECK(l.network().head_outputs() == 3);
        Rng rng(9);
        l.adapt(set, rng);
        const auto p = l.predict(std::span<const LabeledItem>(set.items)).scores;
        if (run == 0) first = p;
        else CHECK(p == first);
    }
    l.begin_task(7);
    const auto body = l.network().body_state();
    const auto head = l.network().head_state();
    l.begin_task(7);
    CHECK(l.network().body_state() == body);
    CHECK(l.network().head_state() == head);
    CHECK(l.network().head_outputs() == 7);
}

TEST_CASE("fine-tuning with zero steps leaves parameters unchanged") {
    auto spec = tiny(LearnerKind::convnet);
    spec.fine_tune_steps = 0;
    auto pr = pretrain(spec, background(), quick_pretrain());
    auto& l = dynamic_cast<ConvNetLearner&>(*pr.learner);
    l.begin_task(2);
    const auto body = l.network().body_state();
    const auto head = l.network().head_state();
    Rng rng(0);
    l.adapt(make_set(background(), {{0, 0}, {1, 1}}, 2), rng);
    CHECK(l.network().body_state() == body);
    CHECK(l.network().head_state() == head);
}

TEST_CASE("convnet fine-tuning loss is non-increasing in at least 90% of trials at lr 0.01") {
    auto spec = tiny(LearnerKind::convnet);
    spec.lr = 0.01;
    spec.fine_tune_steps = 10;
    auto pr = pretrain(spec, background(), quick_pretrain());
    auto& l = dynamic_cast<ConvNetLearner&>(*pr.learner);
    int monotone = 0;
    for (int trial = 0; trial < 20; ++trial) {
        Rng pick(static_cast<std::uint64_t>(trial));
        const auto classes = pick.choose(12, 3);
        const auto set = make_set(background(),
                                  {{static_cast<int>(classes[0]), 0}, {static_cast<int>(classes[1]), 1},
                                   {static_cast<int>(classes[2]), 2}},
                                  2);
        l.begin_task(3);
        l.adapt(set, pick);
        const auto& losses = l.last_fine_tune_losses();
        bool ok = true;
        for (std::size_t i = 1; i < losses.size(); ++i) ok = ok && losses[i] <= losses[i - 1];
        monotone += ok;
    }
    CHECK(monotone >= 18);
}

TEST_CASE("an untrained head scores chance level") {
    auto pr = pretrain(tiny(LearnerKind::convnet), background(), quick_pretrain());
    const auto eval = synth_generate(20, 4, 12, 31);
    const auto cfg = preset("baseline1");
    double total = 0;
    for (int t = 0; t < 50; ++t) {
        Rng rng = task_stream(5, t);
        const Task task = sample_task(eval, cfg, rng);
        pr.learner->begin_task(task.label_count);
        total += accuracy(pr.learner->predict(std::span<const LabeledItem>(task.target_set)), task.target_set);
    }
    CHECK(std::abs(total / 50 - 0.1) <= 0.05);
}

TEST_CASE("gradient check: symmetric zero probe and repeatability") {
    nn::ConvNet<double> net(nn::NetShape{8, 3, 2}, 4);
    net.reset_head(4);  // zero head
    const std::vector<double> input(4 * 64, 0.0);
    const std::vector<int> labels{0, 1, 2, 3};
    std::vector<double> logits, grad;
    nn::ConvNet<double>::Cache cache;
    net.forward(input, 4, nn::BnMode::batch, logits, &cache);
    nn::softmax_cross_entropy<double>(logits, 4, 4, labels, &grad);
    net.zero_grad();
    net.backward(cache, grad);
    for (auto& p : net.params())
        for (double g : p.grad) CHECK(std::abs(g) < 1e-15);

    LearnerSpec spec = tiny(LearnerKind::convnet);
    const auto d = synth_generate(3, 2, 12, 0);
    std::vector<Image> probe{d.classes[0].samples[0].image, d.classes[1].samples[0].image,
                             d.classes[2].samples[0].image};
    const std::vector<int> l3{0, 1, 2};
    const auto a = finite_difference_check(spec, probe, l3, 3);
    const auto b = finite_difference_check(spec, probe, l3, 3);
    CHECK(a.max_relative_error == b.max_relative_error);
    CHECK(a.checked >= 50);
    CHECK_THROWS_AS(finite_difference_check(spec, probe, std::vector<int>{0}, 3), ConfigError);
}

TEST_CASE("pretraining lowers the loss") {
    auto cfg = quick_pretrain();
    cfg.epochs = 4;
    cfg.iterations_per_epoch = 25;
    const auto r = pretrain(tiny(LearnerKind::convnet), background(), cfg);
    CHECK(r.epoch_losses.back() < r.epoch_losses.front());
    const auto p = pretrain(tiny(LearnerKind::protonet), background(), cfg);
    CHECK(p.epoch_losses.back() < p.epoch_losses.front());
}
