// The streaming adaptation pipeline: per-sample view aggregation, residual
// logit refinement, reward evaluation, cache admission, and periodic
// prototype evolution, plus the run-level harness that folds a whole stream
// into a report.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bpre/config.hpp"
#include "bpre/prototype.hpp"
#include "bpre/reward.hpp"
#include "bpre/types.hpp"

namespace bpre {

// Softmax over cosine(f, text_c) / tau_clip.
ProbabilityVector zero_shot_probs(std::span<const double> feature,
                                  std::span<const FeatureVector> text_embeddings,
                                  double tau_clip);

struct ViewAggregate {
    FeatureVector f_agg;        // normalized mean of the selected views
    ProbabilityVector p_agg;    // mean of the selected views' distributions
    std::vector<std::size_t> selected;  // view indices, ascending
};

// Scores every view, keeps the ceil(rho * N) lowest-entropy ones (subject to
// the optional absolute entropy gate), and averages them.
ViewAggregate aggregate_views(const TestSample& sample,
                              std::span<const FeatureVector> text_embeddings,
                              const EngineConfig& config);

// fused_c = beta * cos(f_agg, text_c) + alpha * cos(f_agg, prototype_c).
std::vector<double> residual_refine(std::span<const double> f_agg,
                                    std::span<const FeatureVector> text_embeddings,
                                    std::span<const FeatureVector> prototypes,
                                    double alpha, double beta);

struct PredictionRecord {
    std::int64_t sample_id = 0;
    ProbabilityVector clip_probs;      // aggregated zero-shot distribution
    std::vector<double> fused_scores;  // C refined logits
    std::int32_t predicted = -1;       // argmax of fused_scores
    RewardBreakdown reward;
    AdmitOutcome admit_outcome = AdmitOutcome::rejected_entropy;
    bool admitted = false;  // sample entered its predicted class's cache
    bool prototype_updated = false;
    std::optional<bool> correct;  // set iff the sample carried a label
};

// Scalar counts of live engine-owned state, used to verify the streaming
// memory bound.  Scratch covers the per-step transient buffers.
struct Footprint {
    std::uint64_t prototype_scalars = 0;
    std::uint64_t cache_scalars = 0;
    std::uint64_t memory_scalars = 0;
    std::uint64_t counter_scalars = 0;
    std::uint64_t scratch_scalars = 0;

    std::uint64_t state_scalars() const {
        return prototype_scalars + cache_scalars + memory_scalars + counter_scalars;
    }
};

struct RewardMask {
    bool sim = true;
    bool conf = true;
    bool div = true;

    bool any() const { return sim || conf || div; }
};

struct RunReport {
    EngineConfig config;
    std::uint64_t stream_length = 0;
    std::uint64_t labeled_count = 0;
    double overall_accuracy = 0.0;  // meaningful iff labeled_count > 0
    std::vector<std::uint64_t> per_class_correct;
    std::vector<std::uint64_t> per_class_total;

    std::vector<double> reward_trajectory;  // r_final per sample, in order
    std::vector<std::uint64_t> dispersion_steps;
    std::vector<std::vector<double>> dispersion_snapshots;  // C values each
    std::int64_t first_full_cache_step = -1;
    std::vector<double> dispersion_at_first_full;

    std::uint64_t admissions = 0;  // admitted + replaced
    std::uint64_t evictions = 0;   // replaced only
    std::uint64_t prototype_updates = 0;
    std::uint64_t rejected_entropy = 0;
    std::uint64_t rejected_full = 0;

    Footprint peak_footprint;
    double wall_time = 0.0;  // seconds; excluded from canonical serialization
    std::vector<std::string> warnings;

    // Populated only when the caller asks for per-sample records.
    std::vector<PredictionRecord> records;

    // Final adapted state, for checkpointing; never serialized into the
    // report JSON.
    PrototypeBank final_bank;

    bool has_accuracy() const { return labeled_count > 0; }
};

// One adaptation state over a fixed text-embedding set.  Strictly sequential:
// callers drive it one sample at a time.
class Engine {
  public:
    Engine(std::vector<FeatureVector> text_embeddings, const EngineConfig& config);

    PredictionRecord step(const TestSample& sample);

    const PrototypeBank& bank() const { return bank_; }
    const DiversityMemory& memory() const { return memory_; }
    std::uint64_t global_step() const { return global_step_; }
    std::size_t num_classes() const { return text_embeddings_.size(); }
    std::size_t dim() const { return dim_; }

    Footprint footprint() const;  // current live state
    const Footprint& peak_footprint() const { return peak_; }

  private:
    EngineConfig config_;
    std::vector<FeatureVector> text_embeddings_;
    std::size_t dim_ = 0;
    PrototypeBank bank_;
    DiversityMemory memory_;
    RewardWeights weights_;
    std::uint64_t global_step_ = 0;
    Footprint peak_;

    void track_footprint(std::uint64_t scratch);
};

// Folds step over the stream in order.  keep_records controls whether the
// report retains every PredictionRecord (the engine itself never does).
RunReport run_stream(const std::vector<TestSample>& samples,
                     const std::vector<FeatureVector>& text_embeddings,
                     const EngineConfig& config, bool keep_records = false);

// Zeroes the lambda of every excluded reward component (no renormalization)
// and runs the stream.
RunReport run_ablation(const std::vector<TestSample>& samples,
                       const std::vector<FeatureVector>& text_embeddings,
                       const EngineConfig& config, const RewardMask& mask,
                       bool keep_records = false);

// Deterministic serializations.  Canonical JSON (include_wall_time = false)
// is byte-stable across replays of the same inputs.
std::string report_to_json(const RunReport& report, bool include_wall_time);
std::string records_to_csv(const std::vector<PredictionRecord>& records);

// Number of worker threads for per-view scoring, from BPRE_THREADS (>= 1).
unsigned thread_budget();

}  // namespace bpre
