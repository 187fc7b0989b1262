#include <algorithm>
#include <cmath>
#include <string>

#include "cfsl/error.hpp"
#include "cfsl/models.hpp"

namespace cfsl {
namespace {

void check_config(const LearnerSpec& spec, const ClassDataset& background, const PretrainConfig& config) {
    spec.validate();
    const auto v = config.violations();
    if (!v.empty()) {
        std::string msg = "invalid pretrain config:";
        for (const auto& s : v) msg += "\n  - " + s;
        throw ConfigError(msg);
    }
    if (background.classes.empty() || background.sample_count() == 0) {
        throw ConfigError("pretraining needs a nonempty background set");
    }
    const auto shape = background.image_shape();
    if (shape.first != spec.image_size || shape.second != spec.image_size) {
        throw ConfigError("background images are " + std::to_string(shape.first) + "x" + std::to_string(shape.second) +
                          ", learner expects " + std::to_string(spec.image_size));
    }
}

void check_loss(double loss, int epoch, int iteration) {
    if (!std::isfinite(loss)) {
        throw DivergenceError("pretraining loss is not finite (epoch " + std::to_string(epoch) + ", iteration " +
                              std::to_string(iteration) + ")");
    }
}

PretrainResult pretrain_convnet(const LearnerSpec& spec, const ClassDataset& bg, const PretrainConfig& cfg,
                                bool keep) {
    const auto seed = static_cast<std::uint64_t>(cfg.seed);
    auto learner = std::make_unique<ConvNetLearner>(spec, seed);
    auto& net = learner->network();
    Rng rng = Rng::derive(seed, {0x9e7au});
    const int classes = static_cast<int>(bg.classes.size());
    net.reset_head(classes, &rng, 0.01f);

    PretrainResult result;
    std::vector<const Image*> ptrs(static_cast<std::size_t>(cfg.batch_size));
    std::vector<int> labels(static_cast<std::size_t>(cfg.batch_size));
    std::vector<float> logits, grad;
    nn::ConvNet<float>::Cache cache;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int it = 0; it < cfg.iterations_per_epoch; ++it) {
            for (int b = 0; b < cfg.batch_size; ++b) {
                const auto c = rng.uniform_index(static_cast<std::uint64_t>(classes));
                const auto& cls = bg.classes[c];
                ptrs[b] = &cls.samples[rng.uniform_index(cls.samples.size())].image;
                labels[b] = static_cast<int>(c);
            }
            const ImageBatch batch = preprocess_batch(std::span<const Image* const>(ptrs), cfg.augment, rng);
            net.forward(batch.data, batch.count, nn::BnMode::batch, logits, &cache);
            const float loss = nn::softmax_cross_entropy<float>(logits, batch.count, classes, labels, &grad);
            check_loss(loss, epoch, it);
            net.zero_grad();
            net.backward(cache, grad);
            net.sgd_step(static_cast<float>(cfg.lr));
            epoch_loss += loss;
        }
        result.epoch_losses.push_back(epoch_loss / cfg.iterations_per_epoch);
        if (keep) {
            result.epoch_checkpoints.push_back({spec, net.body_state(), "epoch" + std::to_string(epoch + 1), 0.0});
        }
    }
    learner->take_snapshot();
    result.learner = std::move(learner);
    return result;
}

PretrainResult pretrain_protonet(const LearnerSpec& spec, const ClassDataset& bg, const PretrainConfig& cfg,
                                 bool keep) {
    const auto seed = static_cast<std::uint64_t>(cfg.seed);
    auto learner = std::make_unique<ProtoNetLearner>(spec, seed);
    auto& net = learner->network();
    Rng rng = Rng::derive(seed, {0x9e7bu});

    const auto per_class = static_cast<std::size_t>(1 + cfg.episode_queries);
    std::vector<std::size_t> eligible;
    for (std::size_t c = 0; c < bg.classes.size(); ++c) {
        if (bg.classes[c].samples.size() >= per_class) eligible.push_back(c);
    }
    const int way = std::min<int>(cfg.episode_way, static_cast<int>(eligible.size()));
    if (way < 2) {
        throw ConfigError("protonet pretraining needs >= 2 background classes with >= " + std::to_string(per_class) +
                          " samples");
    }
    const int q = cfg.episode_queries;
    const int dim = net.embedding_dim();

    PretrainResult result;
    std::vector<const Image*> ptrs;
    std::vector<int> support_labels(static_cast<std::size_t>(way)), query_labels;
    std::vector<float> emb, gs, gq, grad;
    nn::ConvNet<float>::Cache cache;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int it = 0; it < cfg.iterations_per_epoch; ++it) {
            ptrs.assign(static_cast<std::size_t>(way * (1 + q)), nullptr);
            query_labels.clear();
            const auto classes = rng.choose(eligible.size(), static_cast<std::size_t>(way));
            for (int c = 0; c < way; ++c) {
                const auto& cls = bg.classes[eligible[classes[c]]];
                const auto picks = rng.choose(cls.samples.size(), per_class);
                support_labels[c] = c;
                ptrs[c] = &cls.samples[picks[0]].image;
                for (int j = 0; j < q; ++j) {
                    ptrs[static_cast<std::size_t>(way + c * q + j)] = &cls.samples[picks[1 + j]].image;
                    query_labels.push_back(c);
                }
            }
            const ImageBatch batch = preprocess_batch(std::span<const Image* const>(ptrs), cfg.augment, rng);
            net.forward(batch.data, batch.count, nn::BnMode::batch, emb, &cache);
            const std::size_t split = static_cast<std::size_t>(way) * dim;
            const std::span<const float> all(emb);
            const float loss = nn::prototype_loss<float>(all.subspan(0, split), support_labels, all.subspan(split),
                                                         query_labels, way, dim, &gs, &gq);
            check_loss(loss, epoch, it);
            grad.assign(gs.begin(), gs.end());
            grad.insert(grad.end(), gq.begin(), gq.end());
            net.zero_grad();
            net.backward(cache, grad);
            net.sgd_step(static_cast<float>(cfg.lr));
            epoch_loss += loss;
        }
        result.epoch_losses.push_back(epoch_loss / cfg.iterations_per_epoch);
        if (keep) {
            result.epoch_checkpoints.push_back({spec, net.body_state(), "epoch" + std::to_string(epoch + 1), 0.0});
        }
    }
    learner->mark_pretrained();
    result.learner = std::move(learner);
    return result;
}

}  // namespace

PretrainResult pretrain(const LearnerSpec& spec, const ClassDataset& background, const PretrainConfig& config,
                        bool keep_epoch_checkpoints) {
    check_config(spec, background, config);
    return spec.kind == LearnerKind::convnet ? pretrain_convnet(spec, background, config, keep_epoch_checkpoints)
                                             : pretrain_protonet(spec, background, config, keep_epoch_checkpoints);
}

LearnerSpec learner_preset(std::string_view experiment, LearnerKind kind) {
    struct Row {
        const char* name;
        int filters, stages;
        double lr;
        int steps;
    };
    // Scaling rows and their reference fine-tuning step counts; the
    // instance rows reuse Baseline 2 hyperparameters with their own step
    // counts, the replication rows reuse Baseline 1.
    static constexpr Row rows[] = {
        {"baseline1", 512, 3, 0.01, 120},     {"baseline2", 128, 3, 0.01, 60},
        {"wide1", 256, 3, 0.01, 30},          {"wide2", 128, 2, 0.01, 30},
        {"deep1", 256, 3, 0.01, 5},           {"deep2", 256, 3, 0.01, 5},
        {"instance_exp1", 128, 3, 0.01, 120}, {"instance_exp2", 128, 3, 0.01, 120},
        {"instance_exp3", 128, 3, 0.01, 120}, {"instance_exp4", 128, 3, 0.01, 60},
        {"instance_exp5", 128, 3, 0.01, 30},  {"replication1", 512, 3, 0.01, 120},
        {"replication2", 512, 3, 0.01, 120},  {"replication3", 512, 3, 0.01, 120},
        {"replication4", 512, 3, 0.01, 120},  {"replication5", 512, 3, 0.01, 120},
    };
    for (const auto& r : rows) {
        if (experiment != r.name) continue;
        LearnerSpec spec;
        spec.kind = kind;
        if (kind == LearnerKind::convnet) {
            spec.filters = r.filters;
            spec.stages = r.stages;
            spec.lr = r.lr;
            spec.fine_tune_steps = r.steps;
        } else {
            // Protonet weights stay frozen after pretraining.
            spec.filters = 64;
            spec.stages = 3;
            spec.lr = r.lr;
            spec.fine_tune_steps = 0;
        }
        return spec;
    }
    throw LookupError("no learner preset for experiment '" + std::string(experiment) + "'");
}

}  // namespace cfsl
