// Shared plain-data types used across the engine modules.
#pragma once

#include <cstdint>
#include <vector>

#include "bpre/numkit.hpp"

namespace bpre {

// One test-stream element: a handful of augmented views of a single image.
// View 0 is expected to be the unaugmented original. true_label is -1 when
// the stream carries no ground truth.
struct TestSample {
    std::int64_t sample_id = 0;
    std::vector<FeatureVector> view_features;
    std::int32_t true_label = -1;

    bool has_label() const { return true_label >= 0; }
};

}  // namespace bpre
