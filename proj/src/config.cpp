#include "bpre/config.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <variant>

#include "json.hpp"

namespace bpre {
namespace {

using Member = std::variant<double EngineConfig::*, std::uint32_t EngineConfig::*,
                            std::uint64_t EngineConfig::*, std::string EngineConfig::*>;

struct Field {
    std::string_view key;
    Member member;
};

constexpr std::size_t kFieldCount = 20;

const std::array<Field, kFieldCount>& fields() {
    static const std::array<Field, kFieldCount> table = {{
        {"tau-clip", &EngineConfig::tau_clip},
        {"rho", &EngineConfig::rho},
        {"view-entropy-gate", &EngineConfig::view_entropy_gate},
        {"entropy-threshold", &EngineConfig::entropy_threshold},
        {"cache-capacity", &EngineConfig::cache_capacity},
        {"momentum", &EngineConfig::momentum},
        {"tau", &EngineConfig::tau},
        {"update-period", &EngineConfig::update_period},
        {"counter-mode", &EngineConfig::counter_mode},
        {"alpha", &EngineConfig::alpha},
        {"beta", &EngineConfig::beta},
        {"fusion", &EngineConfig::fusion},
        {"lambda-sim", &EngineConfig::lambda_sim},
        {"lambda-conf", &EngineConfig::lambda_conf},
        {"lambda-div", &EngineConfig::lambda_div},
        {"r-min", &EngineConfig::r_min},
        {"warmup-steps", &EngineConfig::warmup_steps},
        {"warmup-schedule", &EngineConfig::warmup_schedule},
        {"similarity-scope", &EngineConfig::similarity_scope},
        {"memory-capacity", &EngineConfig::memory_capacity},
    }};
    return table;
}

std::string normalize_key(const std::string& key) {
    // Single-letter sweep shorthands, then underscore-to-hyphen folding.
    if (key == "M") return "memory-capacity";
    if (key == "K") return "cache-capacity";
    if (key == "U") return "update-period";
    std::string out = key;
    for (char& c : out) {
        if (c == '_') c = '-';
    }
    return out;
}

const Field& find_field(const std::string& key) {
    const std::string canon = normalize_key(key);
    for (const Field& f : fields()) {
        if (f.key == canon) return f;
    }
    raise(Err::invalid_config, "unknown config key '" + key + "'");
}

double parse_real(const std::string& key, const std::string& value) {
    std::size_t consumed = 0;
    double parsed = 0.0;
    try {
        parsed = std::stod(value, &consumed);
    } catch (const std::exception&) {
        raise(Err::invalid_config, key + ": cannot parse '" + value + "' as a number");
    }
    if (consumed != value.size() || !std::isfinite(parsed)) {
        raise(Err::invalid_config, key + ": cannot parse '" + value + "' as a number");
    }
    return parsed;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value,
                             std::uint64_t max_value) {
    std::size_t consumed = 0;
    long long parsed = 0;
    try {
        parsed = std::stoll(value, &consumed);
    } catch (const std::exception&) {
        raise(Err::invalid_config, key + ": cannot parse '" + value + "' as an integer");
    }
    if (consumed != value.size() || parsed < 0 ||
        static_cast<unsigned long long>(parsed) > max_value) {
        raise(Err::invalid_config,
              key + ": '" + value + "' is not a nonnegative integer in range");
    }
    return static_cast<std::uint64_t>(parsed);
}

void require(bool ok, const std::string& message) {
    if (!ok) raise(Err::invalid_config, message);
}

}  // namespace

void validate(const EngineConfig& c) {
    require(c.tau_clip > 0.0, "tau-clip must be positive");
    require(c.rho > 0.0 && c.rho <= 1.0, "rho must lie in (0, 1]");
    require(c.view_entropy_gate >= 0.0 && c.view_entropy_gate <= 1.0,
            "view-entropy-gate must lie in [0, 1]");
    require(c.entropy_threshold >= 0.0 && c.entropy_threshold <= 1.0,
            "entropy-threshold must lie in [0, 1]");
    require(c.cache_capacity >= 1, "cache-capacity must be at least 1");
    require(c.momentum >= 0.0 && c.momentum <= 1.0, "momentum must lie in [0, 1]");
    require(c.tau > 0.0, "tau must be positive");
    require(c.counter_mode == "per-class" || c.counter_mode == "global",
            "counter-mode must be 'per-class' or 'global'");
    require(c.alpha >= 0.0, "alpha must be nonnegative");
    require(c.beta >= 0.0, "beta must be nonnegative");
    require(c.fusion == "residual-cosine", "fusion must be 'residual-cosine'");
    require(c.lambda_sim >= 0.0 && c.lambda_conf >= 0.0 && c.lambda_div >= 0.0,
            "reward weights must be nonnegative");
    require(c.lambda_sim > 0.0 || c.lambda_conf > 0.0 || c.lambda_div > 0.0,
            "at least one reward weight must be positive");
    require(std::isfinite(c.r_min), "r-min must be finite");
    require(c.warmup_steps >= 1, "warmup-steps must be at least 1");
    require(c.warmup_schedule == "linear", "warmup-schedule must be 'linear'");
    require(c.similarity_scope == "all" || c.similarity_scope == "predicted",
            "similarity-scope must be 'all' or 'predicted'");
    require(c.memory_capacity >= 1, "memory-capacity must be at least 1");
}

RewardWeights reward_weights(const EngineConfig& config) {
    RewardWeights w;
    w.lambda_sim = config.lambda_sim;
    w.lambda_conf = config.lambda_conf;
    w.lambda_div = config.lambda_div;
    w.r_min = config.r_min;
    w.warmup_steps = config.warmup_steps;
    return w;
}

CounterMode parse_counter_mode(const std::string& mode) {
    if (mode == "per-class") return CounterMode::per_class;
    if (mode == "global") return CounterMode::global;
    raise(Err::invalid_config, "counter-mode must be 'per-class' or 'global', got '" +
                                   mode + "'");
}

void set_by_key(EngineConfig& config, const std::string& key, const std::string& value) {
    const Field& field = find_field(key);
    std::visit(
        [&](auto member) {
            using T = std::remove_reference_t<decltype(config.*member)>;
            if constexpr (std::is_same_v<T, double>) {
                config.*member = parse_real(std::string(field.key), value);
            } else if constexpr (std::is_same_v<T, std::uint32_t>) {
                config.*member = static_cast<std::uint32_t>(
                    parse_unsigned(std::string(field.key), value, UINT32_MAX));
            } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                config.*member = parse_unsigned(std::string(field.key), value, UINT64_MAX);
            } else {
                config.*member = value;
            }
        },
        field.member);
}

std::string canonical_key(const std::string& key) {
    return std::string(find_field(key).key);
}

std::string to_json_string(const EngineConfig& config) {
    nlohmann::ordered_json j;
    for (const Field& field : fields()) {
        std::visit([&](auto member) { j[std::string(field.key)] = config.*member; },
                   field.member);
    }
    return j.dump(2);
}

EngineConfig config_from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        raise(Err::invalid_config, std::string("config JSON parse failure: ") + e.what());
    }
    if (!j.is_object()) {
        raise(Err::invalid_config, "config JSON must be an object");
    }
    EngineConfig config;
    for (const auto& [key, value] : j.items()) {
        const Field& field = find_field(key);
        const auto type_error = [&]() {
            raise(Err::invalid_config,
                  "config key '" + std::string(field.key) + "' has the wrong JSON type");
        };
        std::visit(
            [&](auto member) {
                using T = std::remove_reference_t<decltype(config.*member)>;
                if constexpr (std::is_same_v<T, double>) {
                    if (!value.is_number()) type_error();
                    config.*member = value.get<double>();
                } else if constexpr (std::is_same_v<T, std::string>) {
                    if (!value.is_string()) type_error();
                    config.*member = value.get<std::string>();
                } else {
                    if (!value.is_number_integer() && !value.is_number_unsigned()) {
                        type_error();
                    }
                    const auto raw = value.get<std::int64_t>();
                    if (raw < 0 ||
                        static_cast<std::uint64_t>(raw) > std::numeric_limits<T>::max()) {
                        raise(Err::invalid_config, "config key '" + std::string(field.key) +
                                                       "' is out of range");
                    }
                    config.*member = static_cast<T>(raw);
                }
            },
            field.member);
    }
    return config;
}

EngineConfig config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(Err::io_failure, "cannot open config file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return config_from_json_string(buffer.str());
}

}  // namespace bpre
