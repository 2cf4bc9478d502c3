// Multi-dimensional quality reward for unlabeled stream samples.
//
// A sample's reward mixes three signals: how close its aggregated feature
// sits to the evolving prototype set (similarity), how peaked its predictive
// distribution is (confidence), and how far it lands from recently seen
// batch representatives (diversity).  Early in the stream the combined score
// is pulled toward a conservative floor so unstable prototypes cannot mint
// high-reward samples before the estimator has seen enough data.
#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "bpre/numkit.hpp"

namespace bpre {

struct RewardWeights {
    double lambda_sim = 0.6;
    double lambda_conf = 0.2;
    double lambda_div = 0.2;
    double r_min = 0.1;
    std::uint64_t warmup_steps = 1000;
};

// FIFO ring of recently seen aggregated features, bounded at `capacity`.
// Oldest entry is dropped once full.
class DiversityMemory {
  public:
    explicit DiversityMemory(std::size_t capacity);

    void push(FeatureVector feature);
    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return entries_.empty(); }
    const std::deque<FeatureVector>& entries() const { return entries_; }
    void clear() { entries_.clear(); }

  private:
    std::size_t capacity_;
    std::deque<FeatureVector> entries_;
};

struct RewardBreakdown {
    double r_sim = 0.0;
    double r_conf = 0.0;
    double r_div = 0.0;
    double r_combined = 0.0;  // weighted mix before the warmup floor
    double r_final = 0.0;     // after warmup floor
    std::uint64_t step = 0;   // global step the floor was evaluated at
};

// Mean cosine similarity between `feature` and every prototype.
double similarity_reward(std::span<const double> feature,
                         std::span<const FeatureVector> prototypes);

// 1 - H(p)/log(C): 1.0 for a one-hot distribution, 0.0 for uniform.
double confidence_reward(std::span<const double> probs);

// 1 - max cosine against memory entries; a full 1.0 when memory is empty.
double diversity_reward(std::span<const double> feature, const DiversityMemory& memory);

double combine_rewards(double r_sim, double r_conf, double r_div,
                       const RewardWeights& weights);

// Linear ramp from r_min up to the raw reward over `warmup_steps` steps:
// r_min + (r - r_min) * min(1, step / warmup_steps).
double warmup_floor(double reward, std::uint64_t step, double r_min,
                    std::uint64_t warmup_steps);

// Full pipeline: the three component rewards, their weighted mix, and the
// warmup-floored final value.  Does not mutate `memory`; callers push the
// aggregated feature separately once the sample has been consumed.
RewardBreakdown evaluate_reward(std::span<const double> feature,
                                std::span<const double> probs,
                                std::span<const FeatureVector> prototypes,
                                const DiversityMemory& memory,
                                const RewardWeights& weights, std::uint64_t step);

// Normalizes `batch_mean` and appends it, evicting the oldest entry if full.
void memory_push(DiversityMemory& memory, std::span<const double> batch_mean);

}  // namespace bpre
