// Engine configuration: every tunable knob in one struct, with JSON
// round-tripping and string-keyed assignment for CLI flags and sweeps.
#pragma once

#include <cstdint>
#include <string>

#include "bpre/errors.hpp"
#include "bpre/prototype.hpp"
#include "bpre/reward.hpp"

namespace bpre {

struct EngineConfig {
    // Zero-shot scoring and view aggregation.
    double tau_clip = 0.01;         // logit temperature for text-cosine softmax
    double rho = 0.1;               // fraction of lowest-entropy views kept
    double view_entropy_gate = 1.0; // absolute per-view entropy cap; 1.0 = off

    // Cache admission and prototype evolution.
    double entropy_threshold = 0.1;
    std::uint32_t cache_capacity = 3;
    double momentum = 0.9;
    double tau = 0.01;                 // sample-weight softmax temperature
    std::uint32_t update_period = 10;  // 0 = never update
    std::string counter_mode = "per-class";  // per-class | global

    // Residual logit refinement.
    double alpha = 4.0;  // prototype-affinity weight
    double beta = 4.0;   // text-affinity weight
    std::string fusion = "residual-cosine";

    // Reward mixing and warmup.
    double lambda_sim = 0.6;
    double lambda_conf = 0.2;
    double lambda_div = 0.2;
    double r_min = 0.1;
    std::uint64_t warmup_steps = 1000;
    std::string warmup_schedule = "linear";
    std::string similarity_scope = "all";  // all | predicted
    std::uint32_t memory_capacity = 3;     // diversity-memory depth M
};

// Throws invalid_config with a description of the first offending field.
void validate(const EngineConfig& config);

RewardWeights reward_weights(const EngineConfig& config);
CounterMode parse_counter_mode(const std::string& mode);

// Keys are the kebab-case field names ("tau-clip", "update-period", ...).
// Underscores are accepted in place of hyphens, and the sweep shorthands
// "M" (memory-capacity), "K" (cache-capacity), and "U" (update-period) are
// recognized.  Values parse as numbers or enum strings per field.
void set_by_key(EngineConfig& config, const std::string& key, const std::string& value);

// Resolves a key to its canonical kebab-case name without assigning.
// Throws invalid_config for unknown keys.
std::string canonical_key(const std::string& key);

std::string to_json_string(const EngineConfig& config);
EngineConfig config_from_json_string(const std::string& text);
EngineConfig config_from_json_file(const std::string& path);

}  // namespace bpre
