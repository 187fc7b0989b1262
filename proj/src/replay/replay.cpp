#include <string>

#include "cfsl/error.hpp"
#include "cfsl/replay.hpp"

namespace cfsl {

std::vector<std::string> ReplayConfig::violations() const {
    std::vector<std::string> out;
    if (b < 1) out.push_back("replay.b must be >= 1");
    if (k < 0) out.push_back("replay.k must be >= 0");
    return out;
}

ReplayConfig replay_preset(std::string_view experiment) {
    if (experiment == "baseline1") return {2, 10};
    if (experiment == "baseline2") return {4, 10};
    if (experiment == "wide1") return {2, 20};
    if (experiment == "wide2") return {2, 50};
    if (experiment == "deep1" || experiment == "deep2") return {5, 10};
    if (experiment.starts_with("instance_exp")) return {4, 10};
    if (experiment.starts_with("replication")) return {2, 10};
    throw LookupError("no replay preset for experiment '" + std::string(experiment) + "'");
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw ConfigError("replay buffer capacity must be >= 1");
}

std::size_t ReplayBuffer::item_count() const {
    std::size_t n = 0;
    for (const auto& s : slots_) n += s.items.size();
    return n;
}

void ReplayBuffer::insert(const SupportSet& support) {
    slots_.push_back(support);
    while (slots_.size() > static_cast<std::size_t>(capacity_)) slots_.pop_front();
}

const LabeledItem& ReplayBuffer::item_at(std::size_t flat) const {
    for (const auto& s : slots_) {
        if (flat < s.items.size()) return s.items[flat];
        flat -= s.items.size();
    }
    throw ReplayError("replay index out of range");
}

std::vector<LabeledItem> ReplayBuffer::sample(int k, Rng& rng) const {
    const std::size_t n = item_count();
    if (n == 0) throw ReplayError("cannot sample from an empty replay buffer");
    std::vector<LabeledItem> out;
    if (k <= 0) return out;
    out.reserve(static_cast<std::size_t>(k));
    if (static_cast<std::size_t>(k) <= n) {
        for (std::size_t idx : rng.choose(n, static_cast<std::size_t>(k))) out.push_back(item_at(idx));
    } else {
        for (int i = 0; i < k; ++i) out.push_back(item_at(rng.uniform_index(n)));
    }
    return out;
}

void stm_insert(ReplayBuffer& buffer, const SupportSet& support) { buffer.insert(support); }

std::vector<LabeledItem> stm_sample(const ReplayBuffer& buffer, int k, Rng& rng) { return buffer.sample(k, rng); }

void check_replay_applicable(const ExperimentConfig& config) {
    if (config.nss <= 1) throw ReplayError("replay requires NSS > 1 (experiment '" + config.name + "' has NSS = 1)");
}

void adapt_with_replay(Learner& learner, const SupportSet& support, ReplayBuffer& buffer, const ReplayConfig& config,
                       Rng& rng) {
    if (!learner.supports_replay()) {
        throw ReplayError(std::string(to_string(learner.kind())) + " learner does not support replay");
    }
    buffer.insert(support);
    if (config.k <= 0) {
        learner.fine_tune(support.items, ExtraItems{}, rng);
        return;
    }
    const int k = config.k;
    learner.fine_tune(support.items, [&buffer, k](Rng& r) { return buffer.sample(k, r); }, rng);
}

}  // namespace cfsl
