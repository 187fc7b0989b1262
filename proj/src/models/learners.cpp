#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cfsl/error.hpp"
#include "cfsl/kernels.hpp"
#include "cfsl/models.hpp"

namespace cfsl {

std::string_view to_string(LearnerKind kind) { return kind == LearnerKind::protonet ? "protonet" : "convnet"; }

LearnerKind parse_learner_kind(std::string_view name) {
    if (name == "convnet" || name == "vgg") return LearnerKind::convnet;
    if (name == "protonet" || name == "protonets") return LearnerKind::protonet;
    throw ConfigError("unknown learner kind '" + std::string(name) + "' (expected convnet or protonet)");
}

int LearnerSpec::output_dim(int label_count) const {
    return kind == LearnerKind::convnet ? label_count : nn::embedding_dim(net_shape());
}

std::vector<std::string> LearnerSpec::violations() const {
    std::vector<std::string> out;
    if (filters < 1) out.push_back("filters must be >= 1");
    if (stages < 1) out.push_back("stages must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) out.push_back("lr must be a positive finite number");
    if (fine_tune_steps < 0) out.push_back("fine_tune_steps must be >= 0");
    if (image_size < 2) out.push_back("image_size must be >= 2");
    if (filters >= 1 && stages >= 1 && image_size >= 2 && nn::output_side(net_shape()) < 1) {
        out.push_back(std::to_string(stages) + " stages collapse a " + std::to_string(image_size) + "px image");
    }
    return out;
}

void LearnerSpec::validate() const {
    const auto v = violations();
    if (v.empty()) return;
    std::string msg = "invalid learner spec:";
    for (const auto& s : v) msg += "\n  - " + s;
    throw ConfigError(msg);
}

std::vector<std::string> PretrainConfig::violations() const {
    std::vector<std::string> out;
    if (epochs < 1) out.push_back("pretrain.epochs must be >= 1");
    if (iterations_per_epoch < 1) out.push_back("pretrain.iterations_per_epoch must be >= 1");
    if (batch_size < 2) out.push_back("pretrain.batch_size must be >= 2");
    if (episode_way < 2) out.push_back("pretrain.episode_way must be >= 2");
    if (episode_queries < 1) out.push_back("pretrain.episode_queries must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) out.push_back("pretrain.lr must be a positive finite number");
    return out;
}

std::vector<int> argmax_rows(std::span<const double> scores, int rows, int cols) {
    std::vector<int> out(static_cast<std::size_t>(rows), 0);
    for (int i = 0; i < rows; ++i) {
        const double* row = scores.data() + static_cast<std::size_t>(i) * cols;
        int best = 0;
        for (int j = 1; j < cols; ++j) {
            if (row[j] > row[best]) best = j;
        }
        out[i] = best;
    }
    return out;
}

double accuracy(const Prediction& prediction, std::span<const LabeledItem> targets) {
    if (targets.empty()) return 0.0;
    if (prediction.labels.size() != targets.size()) throw InferenceError("prediction count does not match targets");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) correct += prediction.labels[i] == targets[i].label ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(targets.size());
}

namespace {

std::vector<float> stack(std::span<const Image* const> images, int image_size) {
    const std::size_t plane = static_cast<std::size_t>(image_size) * image_size;
    std::vector<float> out(plane * images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Image& img = *images[i];
        if (img.rows != image_size || img.cols != image_size) {
            throw BatchError("image is " + std::to_string(img.rows) + "x" + std::to_string(img.cols) + ", learner expects " +
                             std::to_string(image_size) + "x" + std::to_string(image_size));
        }
        std::copy(img.pixels.begin(), img.pixels.end(), out.begin() + static_cast<std::ptrdiff_t>(plane * i));
    }
    return out;
}

}  // namespace

void Learner::fine_tune(std::span<const LabeledItem>, const ExtraItems&, Rng&) {
    throw ReplayError(std::string(to_string(kind())) + " learner does not support replay fine-tuning");
}

Prediction Learner::predict(std::span<const LabeledItem> targets) {
    std::vector<const Image*> ptrs;
    ptrs.reserve(targets.size());
    for (const auto& t : targets) ptrs.push_back(&t.image);
    return predict(std::span<const Image* const>(ptrs));
}

// ---------------------------------------------------------------------------
// PrototypeStore

void PrototypeStore::add(int label, std::span<const float> embedding) {
    if (entries_.empty()) dim_ = embedding.size();
    if (embedding.size() != dim_) throw InferenceError("embedding width changed inside one task");
    auto& e = entries_[label];
    if (e.sum.empty()) e.sum.assign(dim_, 0.0);
    for (std::size_t k = 0; k < dim_; ++k) e.sum[k] += embedding[k];
    ++e.count;
}

std::vector<float> PrototypeStore::prototype(int label) const {
    auto it = entries_.find(label);
    if (it == entries_.end()) throw InferenceError("no prototype for label " + std::to_string(label));
    std::vector<float> out(dim_);
    for (std::size_t k = 0; k < dim_; ++k) out[k] = static_cast<float>(it->second.sum[k] / static_cast<double>(it->second.count));
    return out;
}

std::size_t PrototypeStore::count(int label) const {
    auto it = entries_.find(label);
    return it == entries_.end() ? 0 : it->second.count;
}

Prediction PrototypeStore::classify(std::span<const float> embeddings, int n, int label_count) const {
    if (entries_.empty()) throw InferenceError("prototype store is empty; adapt before predict");
    if (embeddings.size() != static_cast<std::size_t>(n) * dim_) throw InferenceError("query embedding width mismatch");
    Prediction p;
    p.label_count = label_count;
    p.scores.assign(static_cast<std::size_t>(n) * label_count, -std::numeric_limits<double>::infinity());
    for (const auto& [label, entry] : entries_) {
        if (label < 0 || label >= label_count) throw InferenceError("stored label " + std::to_string(label) + " out of range");
        const auto proto = prototype(label);
        for (int q = 0; q < n; ++q) {
            const float d = kernels::squared_distance<float>(embeddings.data() + static_cast<std::size_t>(q) * dim_,
                                                             proto.data(), dim_);
            p.scores[static_cast<std::size_t>(q) * label_count + label] = -static_cast<double>(d);
        }
    }
    p.labels = argmax_rows(p.scores, n, label_count);
    return p;
}

// ---------------------------------------------------------------------------
// ConvNetLearner

ConvNetLearner::ConvNetLearner(const LearnerSpec& spec, std::uint64_t seed)
    : spec_(spec), net_((spec.validate(), spec.net_shape()), seed) {
    if (spec.kind != LearnerKind::convnet) throw ConfigError("ConvNetLearner needs a convnet spec");
}

ConvNetLearner::ConvNetLearner(const Checkpoint& ckpt) : ConvNetLearner(ckpt.spec, 0) {
    net_.load_body_state(ckpt.body);
    snapshot_ = ckpt.body;
}

void ConvNetLearner::take_snapshot() {
    net_.drop_head();
    snapshot_ = net_.body_state();
}

Checkpoint ConvNetLearner::checkpoint() const {
    if (!snapshot_) throw LifecycleError("convnet has no pretrained snapshot to checkpoint");
    return {spec_, *snapshot_, "", 0.0};
}

void ConvNetLearner::begin_task(int label_count) {
    if (!snapshot_) throw LifecycleError("begin_task called before pretraining (no snapshot)");
    if (label_count < 1) throw ConfigError("label_count must be >= 1");
    net_.load_body_state(*snapshot_);
    net_.reset_head(label_count);
    label_count_ = label_count;
    in_task_ = true;
    last_losses_.clear();
}

void ConvNetLearner::adapt(const SupportSet& support, Rng& rng) { fine_tune(support.items, ExtraItems{}, rng); }

void ConvNetLearner::fine_tune(std::span<const LabeledItem> current, const ExtraItems& extra, Rng& rng) {
    if (!in_task_) throw LifecycleError("adapt called outside a task (call begin_task first)");
    last_losses_.clear();
    std::vector<float> input;
    std::vector<int> labels;
    std::vector<float> logits, grad;
    nn::ConvNet<float>::Cache cache;

    auto build = [&](std::span<const LabeledItem> a, std::span<const LabeledItem> b) {
        std::vector<const Image*> ptrs;
        labels.clear();
        for (auto part : {a, b}) {
            for (const auto& item : part) {
                if (item.label < 0 || item.label >= label_count_) {
                    throw ConfigError("label " + std::to_string(item.label) + " outside head of size " +
                                      std::to_string(label_count_));
                }
                ptrs.push_back(&item.image);
                labels.push_back(item.label);
            }
        }
        input = stack(ptrs, spec_.image_size);
    };

    if (!extra) build(current, {});
    for (int step = 0; step < spec_.fine_tune_steps; ++step) {
        if (extra) {
            const auto more = extra(rng);
            build(current, more);
        }
        const int n = static_cast<int>(labels.size());
        if (n == 0) return;
        net_.forward(input, n, nn::BnMode::frozen, logits, &cache);
        const float loss = nn::softmax_cross_entropy<float>(logits, n, label_count_, labels, &grad);
        if (!std::isfinite(loss)) throw DivergenceError("fine-tuning loss is not finite at step " + std::to_string(step));
        last_losses_.push_back(loss);
        net_.zero_grad();
        net_.backward(cache, grad);
        net_.sgd_step(static_cast<float>(spec_.lr));
    }
}

Prediction ConvNetLearner::predict(std::span<const Image* const> targets) {
    if (!in_task_) throw LifecycleError("predict called outside a task");
    const int n = static_cast<int>(targets.size());
    Prediction p;
    p.label_count = label_count_;
    if (n == 0) return p;
    std::vector<float> logits, probs;
    net_.forward(stack(targets, spec_.image_size), n, nn::BnMode::frozen, logits);
    nn::softmax_rows<float>(logits, n, label_count_, probs);
    p.scores.assign(probs.begin(), probs.end());
    p.labels = argmax_rows(p.scores, n, label_count_);
    return p;
}

// ---------------------------------------------------------------------------
// ProtoNetLearner

ProtoNetLearner::ProtoNetLearner(const LearnerSpec& spec, std::uint64_t seed)
    : spec_(spec), net_((spec.validate(), spec.net_shape()), seed) {
    if (spec.kind != LearnerKind::protonet) throw ConfigError("ProtoNetLearner needs a protonet spec");
}

ProtoNetLearner::ProtoNetLearner(const Checkpoint& ckpt) : ProtoNetLearner(ckpt.spec, 0) {
    net_.load_body_state(ckpt.body);
    pretrained_ = true;
}

Checkpoint ProtoNetLearner::checkpoint() const {
    if (!pretrained_) throw LifecycleError("protonet is not pretrained");
    return {spec_, net_.body_state(), "", 0.0};
}

std::vector<float> ProtoNetLearner::embed(std::span<const Image* const> images) {
    std::vector<float> out;
    if (images.empty()) return out;
    net_.forward(stack(images, spec_.image_size), static_cast<int>(images.size()), nn::BnMode::frozen, out);
    return out;
}

void ProtoNetLearner::begin_task(int label_count) {
    if (!pretrained_) throw LifecycleError("begin_task called before pretraining");
    if (label_count < 1) throw ConfigError("label_count must be >= 1");
    store_.clear();
    label_count_ = label_count;
    in_task_ = true;
}

void ProtoNetLearner::adapt(const SupportSet& support, Rng&) {
    if (!in_task_) throw LifecycleError("adapt called outside a task (call begin_task first)");
    std::vector<const Image*> ptrs;
    for (const auto& item : support.items) {
        if (item.label < 0 || item.label >= label_count_) {
            throw ConfigError("label " + std::to_string(item.label) + " outside label space of size " +
                              std::to_string(label_count_));
        }
        ptrs.push_back(&item.image);
    }
    const auto emb = embed(ptrs);
    const std::size_t d = static_cast<std::size_t>(net_.embedding_dim());
    for (std::size_t i = 0; i < support.items.size(); ++i) {
        store_.add(support.items[i].label, std::span<const float>(emb.data() + i * d, d));
    }
}

Prediction ProtoNetLearner::predict(std::span<const Image* const> targets) {
    if (!in_task_) throw LifecycleError("predict called outside a task");
    if (store_.empty()) throw InferenceError("protonet has no prototypes; adapt before predict");
    const auto emb = embed(targets);
    return store_.classify(emb, static_cast<int>(targets.size()), label_count_);
}

std::unique_ptr<Learner> make_learner(const Checkpoint& ckpt) {
    if (ckpt.spec.kind == LearnerKind::convnet) return std::make_unique<ConvNetLearner>(ckpt);
    return std::make_unique<ProtoNetLearner>(ckpt);
}

}  // namespace cfsl
