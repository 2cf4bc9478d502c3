#include "bpre/prototype.hpp"

#include <algorithm>
#include <utility>

namespace bpre {
namespace {

void check_class_id(const PrototypeBank& bank, std::int32_t class_id) {
    if (class_id < 0 || static_cast<std::size_t>(class_id) >= bank.num_classes()) {
        raise(Err::invalid_class_id,
              "class id " + std::to_string(class_id) + " outside [0, " +
                  std::to_string(bank.num_classes()) + ")");
    }
}

std::vector<ClassCache> make_caches(std::size_t count) {
    std::vector<ClassCache> caches(count);
    for (std::size_t c = 0; c < count; ++c) {
        caches[c].class_id = static_cast<std::int32_t>(c);
    }
    return caches;
}

std::uint64_t& counter_for(PrototypeBank& bank, std::int32_t class_id) {
    return bank.counter_mode == CounterMode::global
               ? bank.counters[0]
               : bank.counters[static_cast<std::size_t>(class_id)];
}

}  // namespace

PrototypeBank init_from_text(const std::vector<FeatureVector>& text_embeddings) {
    if (text_embeddings.size() < 2) {
        raise(Err::invalid_config, "init_from_text: need at least 2 classes, got " +
                                       std::to_string(text_embeddings.size()));
    }
    const std::size_t d = text_embeddings.front().size();
    PrototypeBank bank;
    bank.prototypes.reserve(text_embeddings.size());
    for (const FeatureVector& t : text_embeddings) {
        if (t.size() != d) {
            raise(Err::dimension_mismatch, "init_from_text: mixed embedding dimensions");
        }
        bank.prototypes.push_back(numkit::l2_normalize(t));
    }
    for (std::size_t a = 0; a < bank.prototypes.size(); ++a) {
        for (std::size_t b = a + 1; b < bank.prototypes.size(); ++b) {
            if (numkit::cosine(bank.prototypes[a], bank.prototypes[b]) > 1.0 - 1e-9) {
                bank.warnings.push_back("duplicate text embeddings for classes " +
                                        std::to_string(a) + " and " + std::to_string(b));
            }
        }
    }
    bank.caches = make_caches(bank.prototypes.size());
    bank.counters.assign(bank.prototypes.size(), 0);
    return bank;
}

PrototypeBank init_from_support(
    const std::vector<std::pair<FeatureVector, std::int32_t>>& labeled_features) {
    std::int32_t max_class = -1;
    for (const auto& [feature, class_id] : labeled_features) {
        if (class_id < 0) {
            raise(Err::invalid_class_id,
                  "init_from_support: negative class id " + std::to_string(class_id));
        }
        max_class = std::max(max_class, class_id);
    }
    if (max_class < 1) {
        raise(Err::invalid_config, "init_from_support: need at least 2 classes");
    }
    const std::size_t num_classes = static_cast<std::size_t>(max_class) + 1;
    const std::size_t d = labeled_features.front().first.size();

    std::vector<FeatureVector> sums(num_classes, FeatureVector(d, 0.0));
    std::vector<std::size_t> counts(num_classes, 0);
    for (const auto& [feature, class_id] : labeled_features) {
        if (feature.size() != d) {
            raise(Err::dimension_mismatch, "init_from_support: mixed feature dimensions");
        }
        FeatureVector& sum = sums[static_cast<std::size_t>(class_id)];
        for (std::size_t i = 0; i < d; ++i) sum[i] += feature[i];
        ++counts[static_cast<std::size_t>(class_id)];
    }

    PrototypeBank bank;
    bank.prototypes.reserve(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (counts[c] == 0) {
            raise(Err::missing_class,
                  "init_from_support: no support feature for class " + std::to_string(c));
        }
        for (double& x : sums[c]) x /= static_cast<double>(counts[c]);
        bank.prototypes.push_back(numkit::l2_normalize(sums[c]));
    }
    bank.caches = make_caches(num_classes);
    bank.counters.assign(num_classes, 0);
    return bank;
}

AdmitResult try_admit(PrototypeBank& bank, std::int32_t class_id,
                      const FeatureVector& feature, double r_final, double entropy,
                      std::uint64_t step) {
    check_class_id(bank, class_id);
    if (!bank.prototypes.empty() && feature.size() != bank.dim()) {
        raise(Err::dimension_mismatch, "try_admit: feature dimension " +
                                           std::to_string(feature.size()) + " vs bank " +
                                           std::to_string(bank.dim()));
    }
    AdmitResult result;
    if (entropy >= bank.entropy_threshold) {
        result.outcome = AdmitOutcome::rejected_entropy;
        return result;
    }
    ClassCache& cache = bank.caches[static_cast<std::size_t>(class_id)];
    CacheEntry entry{feature, r_final, entropy, step};
    if (cache.entries.size() < bank.cache_capacity) {
        cache.entries.push_back(std::move(entry));
        result.outcome = AdmitOutcome::admitted;
        return result;
    }
    // Full: the newcomer must strictly beat the worst-entropy entry.  Among
    // equal-entropy candidates the older one goes first.
    std::size_t worst = 0;
    for (std::size_t i = 1; i < cache.entries.size(); ++i) {
        const CacheEntry& cur = cache.entries[i];
        const CacheEntry& w = cache.entries[worst];
        if (cur.entropy > w.entropy || (cur.entropy == w.entropy && cur.step < w.step)) {
            worst = i;
        }
    }
    if (entropy < cache.entries[worst].entropy) {
        result.evicted = std::move(cache.entries[worst]);
        cache.entries[worst] = std::move(entry);
        result.outcome = AdmitOutcome::replaced;
        return result;
    }
    result.outcome = AdmitOutcome::rejected_full;
    return result;
}

std::vector<double> sample_weights(const ClassCache& cache, double tau) {
    if (cache.entries.empty()) {
        raise(Err::empty_cache, "sample_weights: empty cache for class " +
                                    std::to_string(cache.class_id));
    }
    std::vector<double> rewards;
    rewards.reserve(cache.entries.size());
    for (const CacheEntry& e : cache.entries) rewards.push_back(e.r_final);
    return numkit::softmax(rewards, tau);
}

void evolve(PrototypeBank& bank, std::int32_t class_id) {
    check_class_id(bank, class_id);
    ClassCache& cache = bank.caches[static_cast<std::size_t>(class_id)];
    if (cache.entries.empty()) {
        raise(Err::empty_cache, "evolve: empty cache for class " + std::to_string(class_id));
    }
    const std::vector<double> weights = sample_weights(cache, bank.tau);
    FeatureVector& proto = bank.prototypes[static_cast<std::size_t>(class_id)];
    FeatureVector updated(proto.size(), 0.0);
    for (std::size_t i = 0; i < proto.size(); ++i) {
        updated[i] = bank.momentum * proto[i];
    }
    const double blend = 1.0 - bank.momentum;
    for (std::size_t k = 0; k < cache.entries.size(); ++k) {
        const FeatureVector& f = cache.entries[k].feature;
        for (std::size_t i = 0; i < updated.size(); ++i) {
            updated[i] += blend * weights[k] * f[i];
        }
    }
    numkit::l2_normalize_inplace(updated);
    proto = std::move(updated);
    counter_for(bank, class_id) = 0;
}

bool maybe_evolve(PrototypeBank& bank, std::int32_t class_id) {
    check_class_id(bank, class_id);
    if (bank.update_period == 0) return false;
    std::uint64_t& counter = counter_for(bank, class_id);
    if (counter < bank.update_period) ++counter;
    if (counter < bank.update_period) return false;
    if (bank.caches[static_cast<std::size_t>(class_id)].entries.empty()) {
        return false;  // counter stays at the period until the cache fills
    }
    evolve(bank, class_id);
    return true;
}

std::vector<double> intra_class_dispersion(const PrototypeBank& bank) {
    std::vector<double> dispersion(bank.num_classes(), 0.0);
    for (std::size_t c = 0; c < bank.num_classes(); ++c) {
        const auto& entries = bank.caches[c].entries;
        if (entries.size() < 2) continue;
        double acc = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            for (std::size_t j = i + 1; j < entries.size(); ++j) {
                acc += 1.0 - numkit::cosine(entries[i].feature, entries[j].feature);
                ++pairs;
            }
        }
        dispersion[c] = acc / static_cast<double>(pairs);
    }
    return dispersion;
}

}  // namespace bpre
