#pragma once

#include <deque>
#include <string_view>
#include <vector>

#include "cfsl/episodes.hpp"
#include "cfsl/models.hpp"
#include "cfsl/rng.hpp"

namespace cfsl {

struct ReplayConfig {
    int b = 2;   // buffer capacity, in support sets
    int k = 10;  // replayed samples per fine-tuning step; 0 disables replay draws

    std::vector<std::string> violations() const;
    bool operator==(const ReplayConfig&) const = default;
};

// Preset (b, k) for a named experiment.
ReplayConfig replay_preset(std::string_view experiment);

// Short-term memory: FIFO of the most recent support sets, stored as full
// image copies with their global labels.
class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity);

    int capacity() const { return capacity_; }
    std::size_t size() const { return slots_.size(); }
    std::size_t item_count() const;
    bool empty() const { return slots_.empty(); }
    const std::deque<SupportSet>& slots() const { return slots_; }

    // Appends a copy; evicts the oldest slot beyond capacity.
    void insert(const SupportSet& support);
    void clear() { slots_.clear(); }

    // k items uniform over all stored items: without replacement when
    // k <= item_count(), with replacement otherwise.
    std::vector<LabeledItem> sample(int k, Rng& rng) const;

private:
    const LabeledItem& item_at(std::size_t flat) const;

    int capacity_;
    std::deque<SupportSet> slots_;
};

void stm_insert(ReplayBuffer& buffer, const SupportSet& support);
std::vector<LabeledItem> stm_sample(const ReplayBuffer& buffer, int k, Rng& rng);

// Throws ReplayError when a task stream has a single support set.
void check_replay_applicable(const ExperimentConfig& config);

// Inserts `support` into the buffer first, then fine-tunes the learner for
// spec.fine_tune_steps steps, each on the support items plus k fresh draws
// from the buffer.
void adapt_with_replay(Learner& learner, const SupportSet& support, ReplayBuffer& buffer, const ReplayConfig& config,
                       Rng& rng);

}  // namespace cfsl
