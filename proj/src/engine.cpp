#include "bpre/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <thread>
#include <utility>

#include "json.hpp"

namespace bpre {
namespace {

std::size_t select_count(double rho, std::size_t n_views) {
    // ceil(rho * N) with an epsilon guard against cases like 0.1 * 10
    // landing a hair above the integer.
    const double raw = rho * static_cast<double>(n_views);
    auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    return std::clamp<std::size_t>(k, 1, n_views);
}

std::int32_t argmax_index(std::span<const double> values) {
    return static_cast<std::int32_t>(
        std::max_element(values.begin(), values.end()) - values.begin());
}

void append_double(std::string& out, double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    out += buf;
}

}  // namespace

unsigned thread_budget() {
    const char* raw = std::getenv("BPRE_THREADS");
    if (raw == nullptr || *raw == '\0') return 1;
    char* end = nullptr;
    const long parsed = std::strtol(raw, &end, 10);
    if (end == raw || *end != '\0' || parsed < 1) return 1;
    return static_cast<unsigned>(std::min(parsed, 256L));
}

ProbabilityVector zero_shot_probs(std::span<const double> feature,
                                  std::span<const FeatureVector> text_embeddings,
                                  double tau_clip) {
    if (text_embeddings.size() < 2) {
        raise(Err::invalid_config, "zero_shot_probs: need at least 2 classes");
    }
    std::vector<double> scores(text_embeddings.size());
    for (std::size_t c = 0; c < text_embeddings.size(); ++c) {
        scores[c] = numkit::cosine(feature, text_embeddings[c]);
    }
    return numkit::softmax(scores, tau_clip);
}

ViewAggregate aggregate_views(const TestSample& sample,
                              std::span<const FeatureVector> text_embeddings,
                              const EngineConfig& config) {
    const std::size_t n_views = sample.view_features.size();
    if (n_views == 0) {
        raise(Err::value_out_of_range, "aggregate_views: sample has no views");
    }
    const std::size_t n_classes = text_embeddings.size();

    // Score every view independently; slot-indexed writes keep the result
    // identical for any thread count.
    std::vector<ProbabilityVector> view_probs(n_views);
    std::vector<double> view_entropy(n_views);
    const auto score_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            view_probs[i] =
                zero_shot_probs(sample.view_features[i], text_embeddings, config.tau_clip);
            view_entropy[i] = numkit::normalized_entropy(view_probs[i]);
        }
    };
    const unsigned budget = thread_budget();
    if (budget > 1 && n_views >= 8) {
        const unsigned workers =
            std::min<unsigned>(budget, static_cast<unsigned>(n_views));
        std::vector<std::thread> pool;
        pool.reserve(workers);
        const std::size_t chunk = (n_views + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(n_views, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(score_range, lo, hi);
        }
        for (std::thread& t : pool) t.join();
    } else {
        score_range(0, n_views);
    }

    // The original view (index 0) is always eligible; the absolute gate, when
    // tightened below 1.0, filters the augmented views only.
    std::vector<std::size_t> eligible;
    eligible.reserve(n_views);
    for (std::size_t i = 0; i < n_views; ++i) {
        if (i == 0 || view_entropy[i] <= config.view_entropy_gate) eligible.push_back(i);
    }
    std::stable_sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) {
        return view_entropy[a] < view_entropy[b];
    });
    const std::size_t keep = std::min(select_count(config.rho, n_views), eligible.size());

    ViewAggregate out;
    out.selected.assign(eligible.begin(), eligible.begin() + static_cast<long>(keep));
    std::sort(out.selected.begin(), out.selected.end());

    const std::size_t dim = sample.view_features.front().size();
    FeatureVector feature_sum(dim, 0.0);
    out.p_agg.assign(n_classes, 0.0);
    for (std::size_t idx : out.selected) {
        const FeatureVector& view = sample.view_features[idx];
        for (std::size_t i = 0; i < dim; ++i) feature_sum[i] += view[i];
        for (std::size_t c = 0; c < n_classes; ++c) out.p_agg[c] += view_probs[idx][c];
    }
    const double inv = 1.0 / static_cast<double>(keep);
    for (double& x : feature_sum) x *= inv;
    for (double& p : out.p_agg) p *= inv;
    out.f_agg = numkit::l2_normalize(feature_sum);
    return out;
}

std::vector<double> residual_refine(std::span<const double> f_agg,
                                    std::span<const FeatureVector> text_embeddings,
                                    std::span<const FeatureVector> prototypes,
                                    double alpha, double beta) {
    if (prototypes.empty()) {
        raise(Err::uninitialized_bank, "residual_refine: prototype bank is empty");
    }
    if (prototypes.size() != text_embeddings.size()) {
        raise(Err::dimension_mismatch, "residual_refine: prototype/text class counts differ");
    }
    std::vector<double> fused(text_embeddings.size());
    for (std::size_t c = 0; c < fused.size(); ++c) {
        fused[c] = beta * numkit::cosine(f_agg, text_embeddings[c]) +
                   alpha * numkit::cosine(f_agg, prototypes[c]);
    }
    return fused;
}

Engine::Engine(std::vector<FeatureVector> text_embeddings, const EngineConfig& config)
    : config_(config),
      text_embeddings_(std::move(text_embeddings)),
      memory_(config.memory_capacity),
      weights_(reward_weights(config)) {
    validate(config_);
    bank_ = init_from_text(text_embeddings_);
    dim_ = bank_.dim();
    bank_.momentum = config_.momentum;
    bank_.tau = config_.tau;
    bank_.update_period = config_.update_period;
    bank_.entropy_threshold = config_.entropy_threshold;
    bank_.cache_capacity = config_.cache_capacity;
    bank_.counter_mode = parse_counter_mode(config_.counter_mode);
    if (bank_.counter_mode == CounterMode::global) {
        bank_.counters.assign(1, 0);
    }
    track_footprint(0);
}

Footprint Engine::footprint() const {
    Footprint fp;
    fp.prototype_scalars =
        static_cast<std::uint64_t>(bank_.num_classes()) * bank_.dim();
    for (const ClassCache& cache : bank_.caches) {
        // feature + (r_final, entropy, step) per entry
        fp.cache_scalars += cache.entries.size() * (dim_ + 3);
    }
    fp.memory_scalars = static_cast<std::uint64_t>(memory_.size()) * dim_;
    fp.counter_scalars = bank_.counters.size();
    return fp;
}

void Engine::track_footprint(std::uint64_t scratch) {
    Footprint cur = footprint();
    cur.scratch_scalars = scratch;
    peak_.prototype_scalars = std::max(peak_.prototype_scalars, cur.prototype_scalars);
    peak_.cache_scalars = std::max(peak_.cache_scalars, cur.cache_scalars);
    peak_.memory_scalars = std::max(peak_.memory_scalars, cur.memory_scalars);
    peak_.counter_scalars = std::max(peak_.counter_scalars, cur.counter_scalars);
    peak_.scratch_scalars = std::max(peak_.scratch_scalars, cur.scratch_scalars);
}

PredictionRecord Engine::step(const TestSample& sample) {
    if (sample.view_features.empty()) {
        raise(Err::value_out_of_range,
              "step: sample " + std::to_string(sample.sample_id) + " has no views");
    }
    for (const FeatureVector& view : sample.view_features) {
        if (view.size() != dim_) {
            raise(Err::dimension_mismatch,
                  "step: sample " + std::to_string(sample.sample_id) + " has dimension " +
                      std::to_string(view.size()) + ", bank has " + std::to_string(dim_));
        }
    }
    if (sample.true_label >= static_cast<std::int32_t>(num_classes())) {
        raise(Err::invalid_class_id,
              "step: label " + std::to_string(sample.true_label) + " outside [0, " +
                  std::to_string(num_classes()) + ")");
    }

    ViewAggregate agg = aggregate_views(sample, text_embeddings_, config_);
    std::vector<double> fused = residual_refine(agg.f_agg, text_embeddings_,
                                                bank_.prototypes, config_.alpha,
                                                config_.beta);
    const std::int32_t predicted = argmax_index(fused);
    const double agg_entropy = numkit::normalized_entropy(agg.p_agg);

    std::span<const FeatureVector> scope(bank_.prototypes);
    if (config_.similarity_scope == "predicted") {
        scope = scope.subspan(static_cast<std::size_t>(predicted), 1);
    }
    RewardBreakdown reward =
        evaluate_reward(agg.f_agg, agg.p_agg, scope, memory_, weights_, global_step_);

    AdmitResult admit =
        try_admit(bank_, predicted, agg.f_agg, reward.r_final, agg_entropy, global_step_);
    memory_push(memory_, agg.f_agg);
    const bool updated = maybe_evolve(bank_, predicted);
    ++global_step_;

    const std::size_t n_views = sample.view_features.size();
    const std::uint64_t scratch =
        static_cast<std::uint64_t>(n_views) * (num_classes() + 2) + dim_ +
        2 * num_classes();
    track_footprint(scratch);

    PredictionRecord record;
    record.sample_id = sample.sample_id;
    record.clip_probs = std::move(agg.p_agg);
    record.fused_scores = std::move(fused);
    record.predicted = predicted;
    record.reward = reward;
    record.admit_outcome = admit.outcome;
    record.admitted = admit.outcome == AdmitOutcome::admitted ||
                      admit.outcome == AdmitOutcome::replaced;
    record.prototype_updated = updated;
    if (sample.has_label()) {
        record.correct = (predicted == sample.true_label);
    }
    return record;
}

RunReport run_stream(const std::vector<TestSample>& samples,
                     const std::vector<FeatureVector>& text_embeddings,
                     const EngineConfig& config, bool keep_records) {
    validate(config);
    if (samples.empty()) {
        raise(Err::empty_stream, "run_stream: empty sample stream");
    }
    const auto t0 = std::chrono::steady_clock::now();
    Engine engine(text_embeddings, config);

    RunReport report;
    report.config = config;
    const std::size_t n_classes = engine.num_classes();
    report.per_class_correct.assign(n_classes, 0);
    report.per_class_total.assign(n_classes, 0);
    report.warnings = engine.bank().warnings;

    const std::uint64_t snapshot_period =
        config.update_period == 0 ? 10 : config.update_period;
    std::uint64_t correct_total = 0;
    bool caches_full_seen = false;

    for (const TestSample& sample : samples) {
        PredictionRecord record = engine.step(sample);
        report.reward_trajectory.push_back(record.reward.r_final);

        switch (record.admit_outcome) {
            case AdmitOutcome::admitted:
                ++report.admissions;
                break;
            case AdmitOutcome::replaced:
                ++report.admissions;
                ++report.evictions;
                break;
            case AdmitOutcome::rejected_entropy:
                ++report.rejected_entropy;
                break;
            case AdmitOutcome::rejected_full:
                ++report.rejected_full;
                break;
        }
        if (record.prototype_updated) ++report.prototype_updates;
        if (record.correct.has_value()) {
            ++report.labeled_count;
            const auto label = static_cast<std::size_t>(sample.true_label);
            ++report.per_class_total[label];
            if (*record.correct) {
                ++correct_total;
                ++report.per_class_correct[label];
            }
        }

        if (!caches_full_seen) {
            bool all_full = true;
            for (const ClassCache& cache : engine.bank().caches) {
                if (cache.entries.size() < config.cache_capacity) {
                    all_full = false;
                    break;
                }
            }
            if (all_full) {
                caches_full_seen = true;
                report.first_full_cache_step =
                    static_cast<std::int64_t>(engine.global_step());
                report.dispersion_at_first_full = intra_class_dispersion(engine.bank());
            }
        }
        if (engine.global_step() % snapshot_period == 0) {
            report.dispersion_steps.push_back(engine.global_step());
            report.dispersion_snapshots.push_back(intra_class_dispersion(engine.bank()));
        }
        if (keep_records) report.records.push_back(std::move(record));
    }

    if (report.dispersion_steps.empty() ||
        report.dispersion_steps.back() != engine.global_step()) {
        report.dispersion_steps.push_back(engine.global_step());
        report.dispersion_snapshots.push_back(intra_class_dispersion(engine.bank()));
    }

    report.stream_length = samples.size();
    report.overall_accuracy =
        report.labeled_count > 0
            ? static_cast<double>(correct_total) / static_cast<double>(report.labeled_count)
            : 0.0;
    report.peak_footprint = engine.peak_footprint();
    report.final_bank = engine.bank();
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

RunReport run_ablation(const std::vector<TestSample>& samples,
                       const std::vector<FeatureVector>& text_embeddings,
                       const EngineConfig& config, const RewardMask& mask,
                       bool keep_records) {
    if (!mask.any()) {
        raise(Err::empty_mask, "run_ablation: at least one reward component required");
    }
    EngineConfig masked = config;
    if (!mask.sim) masked.lambda_sim = 0.0;
    if (!mask.conf) masked.lambda_conf = 0.0;
    if (!mask.div) masked.lambda_div = 0.0;
    return run_stream(samples, text_embeddings, masked, keep_records);
}

std::string report_to_json(const RunReport& report, bool include_wall_time) {
    nlohmann::json j;
    j["config"] = nlohmann::json::parse(to_json_string(report.config));
    j["stream"] = {{"length", report.stream_length}, {"labeled", report.labeled_count}};
    if (report.has_accuracy()) {
        nlohmann::json per_class = nlohmann::json::array();
        for (std::size_t c = 0; c < report.per_class_total.size(); ++c) {
            if (report.per_class_total[c] == 0) {
                per_class.push_back(nullptr);
            } else {
                per_class.push_back(static_cast<double>(report.per_class_correct[c]) /
                                    static_cast<double>(report.per_class_total[c]));
            }
        }
        j["accuracy"] = {{"overall", report.overall_accuracy}, {"per_class", per_class}};
    }
    j["counts"] = {{"admissions", report.admissions},
                   {"evictions", report.evictions},
                   {"prototype_updates", report.prototype_updates},
                   {"rejected_entropy", report.rejected_entropy},
                   {"rejected_full", report.rejected_full}};
    j["reward_trajectory"] = report.reward_trajectory;
    j["dispersion"] = {{"steps", report.dispersion_steps},
                       {"snapshots", report.dispersion_snapshots},
                       {"first_full_cache_step", report.first_full_cache_step},
                       {"at_first_full", report.dispersion_at_first_full}};
    j["footprint"] = {{"prototype_scalars", report.peak_footprint.prototype_scalars},
                      {"cache_scalars", report.peak_footprint.cache_scalars},
                      {"memory_scalars", report.peak_footprint.memory_scalars},
                      {"counter_scalars", report.peak_footprint.counter_scalars},
                      {"scratch_scalars", report.peak_footprint.scratch_scalars},
                      {"state_scalars", report.peak_footprint.state_scalars()}};
    j["warnings"] = report.warnings;
    if (include_wall_time) {
        j["wall_time"] = report.wall_time;
    }
    return j.dump(2);
}

std::string records_to_csv(const std::vector<PredictionRecord>& records) {
    std::string out =
        "sample_id,predicted,correct,r_sim,r_conf,r_div,r_final,admitted,"
        "prototype_updated\n";
    for (const PredictionRecord& r : records) {
        out += std::to_string(r.sample_id);
        out += ',';
        out += std::to_string(r.predicted);
        out += ',';
        if (r.correct.has_value()) out += *r.correct ? '1' : '0';
        out += ',';
        append_double(out, r.reward.r_sim);
        out += ',';
        append_double(out, r.reward.r_conf);
        out += ',';
        append_double(out, r.reward.r_div);
        out += ',';
        append_double(out, r.reward.r_final);
        out += ',';
        out += r.admitted ? '1' : '0';
        out += ',';
        out += r.prototype_updated ? '1' : '0';
        out += '\n';
    }
    return out;
}

}  // namespace bpre
