#pragma once

#include <stdexcept>
#include <string>

namespace bpre {

// Every failure the core can raise. The C API collapses these into coarse
// status buckets; the CLI maps the buckets onto its exit codes.
enum class Err {
    // io / persistence
    io_failure,
    bad_magic,
    unsupported_version,
    corrupt_payload,
    norm_violation,
    parse_error,
    invalid_bank,
    // configuration / specs
    invalid_config,
    infeasible_spec,
    empty_mask,
    no_labels,
    // numeric domain
    zero_vector,
    non_finite_input,
    non_positive_temperature,
    invalid_distribution,
    value_out_of_range,
    dimension_mismatch,
    // state machine
    empty_prototype_set,
    empty_cache,
    invalid_class_id,
    missing_class,
    uninitialized_bank,
    empty_stream,
};

class Error : public std::runtime_error {
public:
    Error(Err kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    Err kind() const noexcept { return kind_; }

private:
    Err kind_;
};

[[noreturn]] inline void raise(Err kind, const std::string& message) {
    throw Error(kind, message);
}

const char* err_name(Err kind) noexcept;

}  // namespace bpre
