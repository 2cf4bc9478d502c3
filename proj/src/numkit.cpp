#include "bpre/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace bpre {

const char* err_name(Err kind) noexcept {
    switch (kind) {
        case Err::io_failure: return "io_failure";
        case Err::bad_magic: return "bad_magic";
        case Err::unsupported_version: return "unsupported_version";
        case Err::corrupt_payload: return "corrupt_payload";
        case Err::norm_violation: return "norm_violation";
        case Err::parse_error: return "parse_error";
        case Err::invalid_bank: return "invalid_bank";
        case Err::invalid_config: return "invalid_config";
        case Err::infeasible_spec: return "infeasible_spec";
        case Err::empty_mask: return "empty_mask";
        case Err::no_labels: return "no_labels";
        case Err::zero_vector: return "zero_vector";
        case Err::non_finite_input: return "non_finite_input";
        case Err::non_positive_temperature: return "non_positive_temperature";
        case Err::invalid_distribution: return "invalid_distribution";
        case Err::value_out_of_range: return "value_out_of_range";
        case Err::dimension_mismatch: return "dimension_mismatch";
        case Err::empty_prototype_set: return "empty_prototype_set";
        case Err::empty_cache: return "empty_cache";
        case Err::invalid_class_id: return "invalid_class_id";
        case Err::missing_class: return "missing_class";
        case Err::uninitialized_bank: return "uninitialized_bank";
        case Err::empty_stream: return "empty_stream";
    }
    return "unknown";
}

namespace numkit {

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        raise(Err::dimension_mismatch, "dot: size " + std::to_string(a.size()) +
                                           " vs " + std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

FeatureVector l2_normalize(std::span<const double> v) {
    FeatureVector out(v.begin(), v.end());
    l2_normalize_inplace(out);
    return out;
}

void l2_normalize_inplace(FeatureVector& v) {
    const double norm = l2_norm(v);
    if (!(norm >= kNormEps)) {
        raise(Err::zero_vector, "l2_normalize: norm below " + std::to_string(kNormEps));
    }
    for (double& x : v) x /= norm;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        raise(Err::dimension_mismatch, "cosine: size " + std::to_string(a.size()) +
                                           " vs " + std::to_string(b.size()));
    }
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (!(na >= kNormEps) || !(nb >= kNormEps)) {
        raise(Err::zero_vector, "cosine: zero-length operand");
    }
    const double c = dot(a, b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

ProbabilityVector softmax(std::span<const double> scores, double temperature) {
    if (!(temperature > 0.0)) {
        raise(Err::non_positive_temperature,
              "softmax: temperature must be positive, got " + std::to_string(temperature));
    }
    if (scores.empty()) {
        raise(Err::invalid_distribution, "softmax: empty score vector");
    }
    double max_score = scores[0];
    for (double s : scores) {
        if (!std::isfinite(s)) raise(Err::non_finite_input, "softmax: non-finite score");
        max_score = std::max(max_score, s);
    }
    ProbabilityVector out(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp((scores[i] - max_score) / temperature);
        sum += out[i];
    }
    for (double& p : out) p /= sum;
    return out;
}

double normalized_entropy(std::span<const double> probs) {
    if (probs.size() < 2) {
        raise(Err::invalid_distribution, "normalized_entropy: needs at least 2 classes");
    }
    double sum = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0) {
            raise(Err::invalid_distribution, "normalized_entropy: negative or non-finite entry");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-4) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f", sum);
        raise(Err::invalid_distribution, std::string("normalized_entropy: sum is ") + buf);
    }
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    const double h_norm = h / std::log(static_cast<double>(probs.size()));
    return std::clamp(h_norm, 0.0, 1.0);
}

}  // namespace numkit
}  // namespace bpre
