#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bpre/errors.hpp"

namespace bpre {

// Dense embedding coordinates. Stored as doubles in memory; the on-disk
// bank format narrows to 32-bit floats (see data_io).
using FeatureVector = std::vector<double>;

// Class distribution; entries sum to 1.
using ProbabilityVector = std::vector<double>;

namespace numkit {

inline constexpr double kNormEps = 1e-12;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Scales v to unit L2 norm. Throws zero_vector when the norm is below kNormEps.
FeatureVector l2_normalize(std::span<const double> v);
void l2_normalize_inplace(FeatureVector& v);

// Cosine similarity, clamped to [-1, 1] so downstream reward bounds hold even
// when unit-vector dot products overshoot by a few ulps.
double cosine(std::span<const double> a, std::span<const double> b);

// softmax(scores / temperature) with max-subtraction. Preserves argmax for
// any positive temperature.
ProbabilityVector softmax(std::span<const double> scores, double temperature);

// Shannon entropy divided by log(C), in [0, 1]. Uses the 0*log(0) = 0
// convention. Rejects distributions with negative entries or a sum that
// deviates from 1 by more than 1e-4.
double normalized_entropy(std::span<const double> probs);

}  // namespace numkit
}  // namespace bpre
