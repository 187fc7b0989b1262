#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfsl/dataset.hpp"
#include "cfsl/episodes.hpp"
#include "cfsl/nn.hpp"
#include "cfsl/rng.hpp"

namespace cfsl {

enum class LearnerKind { convnet, protonet };

std::string_view to_string(LearnerKind kind);
LearnerKind parse_learner_kind(std::string_view name);

struct LearnerSpec {
    LearnerKind kind = LearnerKind::convnet;
    int filters = 64;
    int stages = 3;
    double lr = 0.01;          // fine-tune learning rate (convnet)
    int fine_tune_steps = 10;  // gradient steps per support set (convnet)
    int image_size = 28;

    nn::NetShape net_shape() const { return {image_size, filters, stages}; }
    // Head width for a task (convnet) or embedding width (protonet).
    int output_dim(int label_count) const;

    std::vector<std::string> violations() const;
    void validate() const;

    bool operator==(const LearnerSpec&) const = default;
};

// Hyperparameters for a named experiment: filters / stages / lr and the
// reduced fine-tuning step counts used with replay. Experiments without a
// row of their own inherit the closest one (see README).
LearnerSpec learner_preset(std::string_view experiment, LearnerKind kind);

struct PretrainConfig {
    int epochs = 10;
    int iterations_per_epoch = 100;
    int batch_size = 32;       // convnet minibatch
    int episode_way = 20;      // protonet episodes: way
    int episode_queries = 1;   // protonet episodes: queries per class
    double lr = 0.05;
    bool augment = true;
    std::int64_t seed = 0;

    std::vector<std::string> violations() const;
    bool operator==(const PretrainConfig&) const = default;
};

struct Prediction {
    int label_count = 0;
    std::vector<int> labels;     // one per target
    std::vector<double> scores;  // targets x label_count, row-major
};

// Argmax per row; ties go to the smallest label. -inf entries never win
// unless the whole row is -inf.
std::vector<int> argmax_rows(std::span<const double> scores, int rows, int cols);

double accuracy(const Prediction& prediction, std::span<const LabeledItem> targets);

// Supplies extra training items for each fine-tuning step (replay).
using ExtraItems = std::function<std::vector<LabeledItem>(Rng&)>;

// Snapshot of a pretrained learner: enough to rebuild it exactly.
struct Checkpoint {
    LearnerSpec spec;
    std::vector<float> body;
    std::string tag;
    double validation_score = 0.0;
};

class Learner {
public:
    virtual ~Learner() = default;

    virtual LearnerKind kind() const = 0;
    virtual const LearnerSpec& spec() const = 0;
    virtual bool pretrained() const = 0;

    // Resets per-task state: convnet body restored from the pretrained
    // snapshot with a fresh zero head of label_count outputs; protonet
    // prototype store emptied.
    virtual void begin_task(int label_count) = 0;
    virtual void adapt(const SupportSet& support, Rng& rng) = 0;
    virtual Prediction predict(std::span<const Image* const> targets) = 0;

    virtual bool supports_replay() const { return false; }
    // One fine-tuning phase on `current` plus, at every step, the items
    // returned by `extra`.
    virtual void fine_tune(std::span<const LabeledItem> current, const ExtraItems& extra, Rng& rng);

    virtual std::unique_ptr<Learner> clone() const = 0;
    virtual Checkpoint checkpoint() const = 0;

    Prediction predict(std::span<const LabeledItem> targets);
};

// Running-mean class prototypes in embedding space.
class PrototypeStore {
public:
    void clear() { entries_.clear(); }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    void add(int label, std::span<const float> embedding);
    std::vector<float> prototype(int label) const;
    std::size_t count(int label) const;

    // Scores are negative squared distances; labels without a prototype
    // score -inf.
    Prediction classify(std::span<const float> embeddings, int n, int label_count) const;

private:
    struct Entry {
        std::vector<double> sum;
        std::size_t count = 0;
    };
    std::map<int, Entry> entries_;
    std::size_t dim_ = 0;
};

class ConvNetLearner final : public Learner {
public:
    ConvNetLearner(const LearnerSpec& spec, std::uint64_t seed);
    explicit ConvNetLearner(const Checkpoint& ckpt);

    LearnerKind kind() const override { return LearnerKind::convnet; }
    const LearnerSpec& spec() const override { return spec_; }
    bool pretrained() const override { return snapshot_.has_value(); }

    void begin_task(int label_count) override;
    void adapt(const SupportSet& support, Rng& rng) override;
    Prediction predict(std::span<const Image* const> targets) override;
    using Learner::predict;

    bool supports_replay() const override { return true; }
    void fine_tune(std::span<const LabeledItem> current, const ExtraItems& extra, Rng& rng) override;

    std::unique_ptr<Learner> clone() const override { return std::make_unique<ConvNetLearner>(*this); }
    Checkpoint checkpoint() const override;

    // Marks the current body as the pretrained snapshot.
    void take_snapshot();

    nn::ConvNet<float>& network() { return net_; }
    const nn::ConvNet<float>& network() const { return net_; }
    // Loss before each step of the most recent fine-tuning phase.
    const std::vector<double>& last_fine_tune_losses() const { return last_losses_; }

private:
    LearnerSpec spec_;
    nn::ConvNet<float> net_;
    std::optional<std::vector<float>> snapshot_;
    int label_count_ = 0;
    bool in_task_ = false;
    std::vector<double> last_losses_;
};

class ProtoNetLearner final : public Learner {
public:
    ProtoNetLearner(const LearnerSpec& spec, std::uint64_t seed);
    explicit ProtoNetLearner(const Checkpoint& ckpt);

    LearnerKind kind() const override { return LearnerKind::protonet; }
    const LearnerSpec& spec() const override { return spec_; }
    bool pretrained() const override { return pretrained_; }

    void begin_task(int label_count) override;
    void adapt(const SupportSet& support, Rng& rng) override;
    Prediction predict(std::span<const Image* const> targets) override;
    using Learner::predict;

    std::unique_ptr<Learner> clone() const override { return std::make_unique<ProtoNetLearner>(*this); }
    Checkpoint checkpoint() const override;

    void mark_pretrained() { pretrained_ = true; }
    std::vector<float> embed(std::span<const Image* const> images);

    nn::ConvNet<float>& network() { return net_; }
    const nn::ConvNet<float>& network() const { return net_; }
    const PrototypeStore& prototypes() const { return store_; }

private:
    LearnerSpec spec_;
    nn::ConvNet<float> net_;
    bool pretrained_ = false;
    PrototypeStore store_;
    int label_count_ = 0;
    bool in_task_ = false;
};

std::unique_ptr<Learner> make_learner(const Checkpoint& ckpt);

struct PretrainResult {
    std::unique_ptr<Learner> learner;
    std::vector<double> epoch_losses;    // mean training loss per epoch
    std::vector<Checkpoint> epoch_checkpoints;  // one per epoch when requested
};

// Convnet: supervised cross-entropy over all background classes through a
// temporary head that is discarded afterwards. Protonet: episodic
// prototype-loss training. Deterministic given config.seed.
PretrainResult pretrain(const LearnerSpec& spec, const ClassDataset& background, const PretrainConfig& config,
                        bool keep_epoch_checkpoints = false);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct GradientCheckOptions {
    double epsilon = 1e-5;
    int parameters = 64;  // how many randomly chosen entries to compare
    std::uint64_t seed = 0;
    nn::BnMode bn_mode = nn::BnMode::batch;
};

struct GradientCheckResult {
    double max_relative_error = 0.0;
    int checked = 0;
    int skipped_at_kinks = 0;  // entries whose +/- eps probes changed a ReLU or pool decision
};

// Compares analytic cross-entropy gradients of a double-precision copy of
// the network against central differences. Relative error is
// |a - n| / max(|a|, |n|, 1e-6). Entries whose perturbation flips a ReLU
// sign or a max-pool winner are skipped and replaced, since the loss is not
// differentiable there.
GradientCheckResult finite_difference_check(const LearnerSpec& spec, std::span<const Image> probe,
                                            std::span<const int> labels, int classes,
                                            const GradientCheckOptions& options = {});

}  // namespace cfsl
