#include "bpre/reward.hpp"

#include <algorithm>
#include <utility>

namespace bpre {

DiversityMemory::DiversityMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
        raise(Err::invalid_config, "DiversityMemory: capacity must be at least 1");
    }
}

void DiversityMemory::push(FeatureVector feature) {
    if (!entries_.empty() && feature.size() != entries_.front().size()) {
        raise(Err::dimension_mismatch, "DiversityMemory: feature dimension changed");
    }
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.push_back(std::move(feature));
}

double similarity_reward(std::span<const double> feature,
                         std::span<const FeatureVector> prototypes) {
    if (prototypes.empty()) {
        raise(Err::empty_prototype_set, "similarity_reward: no prototypes");
    }
    double acc = 0.0;
    for (const FeatureVector& proto : prototypes) {
        acc += numkit::cosine(feature, proto);
    }
    return acc / static_cast<double>(prototypes.size());
}

double confidence_reward(std::span<const double> probs) {
    return 1.0 - numkit::normalized_entropy(probs);
}

double diversity_reward(std::span<const double> feature, const DiversityMemory& memory) {
    if (memory.empty()) return 1.0;
    double max_sim = -1.0;
    for (const FeatureVector& past : memory.entries()) {
        max_sim = std::max(max_sim, numkit::cosine(feature, past));
    }
    return 1.0 - max_sim;
}

double combine_rewards(double r_sim, double r_conf, double r_div,
                       const RewardWeights& weights) {
    return weights.lambda_sim * r_sim + weights.lambda_conf * r_conf +
           weights.lambda_div * r_div;
}

double warmup_floor(double reward, std::uint64_t step, double r_min,
                    std::uint64_t warmup_steps) {
    // warmup_steps == 0 means no ramp: the raw reward passes through.
    if (warmup_steps == 0 || step >= warmup_steps) return reward;
    if (step == 0) return r_min;
    const double eta = static_cast<double>(step) / static_cast<double>(warmup_steps);
    return r_min + (reward - r_min) * eta;
}

RewardBreakdown evaluate_reward(std::span<const double> feature,
                                std::span<const double> probs,
                                std::span<const FeatureVector> prototypes,
                                const DiversityMemory& memory,
                                const RewardWeights& weights, std::uint64_t step) {
    RewardBreakdown out;
    out.r_sim = similarity_reward(feature, prototypes);
    out.r_conf = confidence_reward(probs);
    out.r_div = diversity_reward(feature, memory);
    out.r_combined = combine_rewards(out.r_sim, out.r_conf, out.r_div, weights);
    out.r_final = warmup_floor(out.r_combined, step, weights.r_min, weights.warmup_steps);
    out.step = step;
    return out;
}

void memory_push(DiversityMemory& memory, std::span<const double> batch_mean) {
    memory.push(numkit::l2_normalize(batch_mean));
}

}  // namespace bpre
