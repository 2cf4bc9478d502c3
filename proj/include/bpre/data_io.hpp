// Embedding-bank persistence (binary + CSV), run manifests, and the
// synthetic domain-shift generator used for desk-scale verification.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bpre/prototype.hpp"
#include "bpre/types.hpp"

namespace bpre {

// The persisted container of text embeddings and per-sample view features —
// the sole input to the engine.
struct EmbeddingBank {
    std::uint32_t dim = 0;
    std::vector<std::string> class_names;
    std::vector<FeatureVector> text_embeddings;
    std::vector<TestSample> samples;
    std::string source;     // "synthetic" | "csv" | "checkpoint" | free-form
    std::string spec_json;  // echoed generator spec when synthetic, else ""

    std::size_t num_classes() const { return text_embeddings.size(); }
    std::uint64_t labeled_count() const;
    bool any_labels() const { return labeled_count() > 0; }
};

struct SynthSpec {
    std::uint32_t classes = 10;
    std::uint32_t dim = 64;
    std::uint32_t n_per_class = 100;
    std::uint32_t views = 8;
    double class_separation = 0.5;  // radians: cone radius of class means
    double sample_noise = 0.05;     // gaussian jitter on each sample feature
    double view_noise = 0.02;       // gaussian jitter on each non-original view
    double text_offset = 0.0;       // radians: text-vs-image misalignment
    double drift_angle = 0.0;       // radians: image-side domain shift
    std::uint64_t seed = 0;
};

std::string synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const std::string& text);

// Binary format, all multi-byte fields little-endian:
//   magic "BPRE" | u32 version=1 | u32 dim | u32 classes | u32 samples |
//   u32 uniform_views (shared view count, 0 when ragged)
//   classes x dim float32 text embeddings, row-major
//   per sample: u32 view_count | u8 has_label | i32 label |
//               view_count x dim float32 views
// A sidecar JSON manifest at <path>.json carries class names and provenance.
// Returns the binary byte count (manifest excluded).
std::uint64_t write_bank(const EmbeddingBank& bank, const std::string& path);

// Validates magic/version/dimensions.  Vectors with |norm - 1| <= 1e-4 load
// as stored; up to 1e-2 they are re-normalized; beyond that the file is
// rejected.  A missing manifest falls back to generated class names.
EmbeddingBank read_bank(const std::string& path);

// Human-editable fixture format.  Columns:
//   kind(text|view), class_or_sample_id, view_index, label, v0, ..., v{d-1}
// Blank lines and lines starting with '#' are skipped.
EmbeddingBank read_csv_bank(const std::string& path);

// Cone-shell geometry: class means sit at a fixed angular radius around a
// random hub direction, text embeddings are rotated off the means by
// text_offset, and every image feature is rotated by drift_angle toward one
// shared random target direction.  Deterministic per seed; the noise
// realization does not depend on the angle parameters, so banks differing
// only in drift or offset share their jitter draws.
EmbeddingBank generate_synthetic(const SynthSpec& spec);

// Adapted state as a bank: prototypes become the text embeddings, cache
// entries become labeled single-view samples.
EmbeddingBank snapshot_from_prototypes(const PrototypeBank& bank,
                                       const std::vector<std::string>& class_names);

}  // namespace bpre
