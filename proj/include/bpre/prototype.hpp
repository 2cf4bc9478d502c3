// Per-class prototype state: bounded entropy-gated caches of admitted
// features, reward-softmax sample weighting, and quality-aware momentum
// prototype updates.
//
// Each class keeps a small cache (default 3) of its most confident admitted
// samples.  Every update_period assignments the class prototype is pulled
// toward the reward-weighted mean of its cache under momentum, then
// re-normalized so cosine scoring stays well-scaled.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bpre/numkit.hpp"

namespace bpre {

struct CacheEntry {
    FeatureVector feature;  // unit norm
    double r_final = 0.0;
    double entropy = 0.0;  // normalized entropy of p_agg at admission time
    std::uint64_t step = 0;
};

struct ClassCache {
    std::int32_t class_id = -1;
    std::vector<CacheEntry> entries;  // |entries| <= capacity at all times
};

enum class AdmitOutcome : std::uint8_t {
    admitted,          // cache had room
    rejected_entropy,  // entropy at or above the admission threshold
    replaced,          // evicted the worst cached entry to make room
    rejected_full,     // cache full of entries at least as confident
};

struct AdmitResult {
    AdmitOutcome outcome = AdmitOutcome::rejected_entropy;
    std::optional<CacheEntry> evicted;  // set iff outcome == replaced
};

enum class CounterMode : std::uint8_t {
    per_class,  // each class counts its own assignments
    global,     // one shared counter; the hit fires on the current class
};

struct PrototypeBank {
    std::vector<FeatureVector> prototypes;  // C unit-norm vectors
    std::vector<ClassCache> caches;         // C caches
    double momentum = 0.9;
    double tau = 0.01;                 // sample-weight softmax temperature
    std::uint32_t update_period = 10;  // 0 = never evolve
    double entropy_threshold = 0.1;
    std::size_t cache_capacity = 3;
    CounterMode counter_mode = CounterMode::per_class;
    std::vector<std::uint64_t> counters;  // per class, or a single shared slot
    std::vector<std::string> warnings;    // degenerate-input notes from init

    std::size_t num_classes() const { return prototypes.size(); }
    std::size_t dim() const { return prototypes.empty() ? 0 : prototypes.front().size(); }
};

// Prototypes start as the normalized class text embeddings; caches empty,
// counters zero.  Near-duplicate embeddings for two classes are accepted but
// recorded in bank.warnings.
PrototypeBank init_from_text(const std::vector<FeatureVector>& text_embeddings);

// Prototypes start as normalized per-class means of labeled support features.
// Every class in [0, C) must have at least one feature, where C is
// max(class_id) + 1.
PrototypeBank init_from_support(
    const std::vector<std::pair<FeatureVector, std::int32_t>>& labeled_features);

// Gate-then-insert: reject when entropy >= threshold; append when there is
// room; otherwise evict the worst-entropy entry if the newcomer beats it
// (ties evict the older entry).  `step` stamps the entry for tie-breaking.
AdmitResult try_admit(PrototypeBank& bank, std::int32_t class_id,
                      const FeatureVector& feature, double r_final, double entropy,
                      std::uint64_t step);

// Softmax over the cached entries' r_final at temperature tau.
std::vector<double> sample_weights(const ClassCache& cache, double tau);

// v_c <- normalize(m * v_c + (1 - m) * sum_i w_i * f_i) over the class cache.
void evolve(PrototypeBank& bank, std::int32_t class_id);

// Counts an assignment to class_id and evolves once the period is reached
// and the cache is nonempty (an empty cache holds the counter at the
// period).  Returns whether an update fired.  update_period == 0 disables
// evolution entirely.
bool maybe_evolve(PrototypeBank& bank, std::int32_t class_id);

// Per-class mean pairwise cosine distance (1 - cos) among cached entries;
// 0.0 for caches with fewer than two entries.
std::vector<double> intra_class_dispersion(const PrototypeBank& bank);

}  // namespace bpre
