#include "bpre.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "bpre/data_io.hpp"
#include "bpre/engine.hpp"

struct bpre_config {
    bpre::EngineConfig cpp;
};

struct bpre_bank {
    bpre::EmbeddingBank cpp;
};

struct bpre_report {
    bpre::RunReport cpp;
    bool kept_records = false;
};

struct bpre_engine {
    std::unique_ptr<bpre::Engine> cpp;
};

namespace {

thread_local std::string g_last_error = "ok";

bpre_status map_error(bpre::Err kind) {
    using bpre::Err;
    switch (kind) {
        case Err::io_failure:
            return BPRE_ERR_IO;
        case Err::bad_magic:
        case Err::unsupported_version:
        case Err::corrupt_payload:
        case Err::norm_violation:
        case Err::parse_error:
        case Err::invalid_bank:
            return BPRE_ERR_FORMAT;
        case Err::invalid_config:
        case Err::infeasible_spec:
        case Err::empty_mask:
            return BPRE_ERR_CONFIG;
        case Err::no_labels:
            return BPRE_ERR_NO_LABELS;
        case Err::dimension_mismatch:
            return BPRE_ERR_DIMENSION;
        case Err::zero_vector:
        case Err::non_finite_input:
        case Err::non_positive_temperature:
        case Err::invalid_distribution:
        case Err::value_out_of_range:
            return BPRE_ERR_DOMAIN;
        case Err::empty_prototype_set:
        case Err::empty_cache:
        case Err::invalid_class_id:
        case Err::missing_class:
        case Err::uninitialized_bank:
        case Err::empty_stream:
            return BPRE_ERR_STATE;
    }
    return BPRE_ERR_UNKNOWN;
}

template <typename Fn>
bpre_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error = "ok";
        return BPRE_OK;
    } catch (const bpre::Error& e) {
        g_last_error = e.what();
        return map_error(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return BPRE_ERR_UNKNOWN;
    } catch (...) {
        g_last_error = "unknown failure";
        return BPRE_ERR_UNKNOWN;
    }
}

char* copy_string(const std::string& text) {
    char* out = static_cast<char*>(std::malloc(text.size() + 1));
    if (out == nullptr) return nullptr;
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

bpre_status require_arg(bool ok, const char* message) {
    if (ok) return BPRE_OK;
    g_last_error = message;
    return BPRE_ERR_STATE;
}

}  // namespace

extern "C" {

const char* bpre_version(void) { return "1.0.0"; }

const char* bpre_last_error(void) { return g_last_error.c_str(); }

void bpre_string_free(char* text) { std::free(text); }

/* ---- configuration ---------------------------------------------------- */

bpre_config* bpre_config_create(void) { return new (std::nothrow) bpre_config(); }

void bpre_config_destroy(bpre_config* config) { delete config; }

bpre_status bpre_config_set(bpre_config* config, const char* key, const char* value) {
    if (auto rc = require_arg(config && key && value, "null argument")) return rc;
    return guarded([&] { bpre::set_by_key(config->cpp, key, value); });
}

bpre_status bpre_config_load_file(bpre_config* config, const char* path) {
    if (auto rc = require_arg(config && path, "null argument")) return rc;
    return guarded([&] { config->cpp = bpre::config_from_json_file(path); });
}

bpre_status bpre_config_validate(const bpre_config* config) {
    if (auto rc = require_arg(config != nullptr, "null config")) return rc;
    return guarded([&] { bpre::validate(config->cpp); });
}

char* bpre_config_json(const bpre_config* config) {
    if (config == nullptr) return nullptr;
    return copy_string(bpre::to_json_string(config->cpp));
}

/* ---- embedding banks --------------------------------------------------- */

bpre_status bpre_bank_open(const char* path, bpre_bank** out) {
    if (auto rc = require_arg(path && out, "null argument")) return rc;
    *out = nullptr;
    return guarded([&] {
        auto handle = std::make_unique<bpre_bank>();
        handle->cpp = bpre::read_bank(path);
        *out = handle.release();
    });
}

bpre_status bpre_bank_open_csv(const char* path, bpre_bank** out) {
    if (auto rc = require_arg(path && out, "null argument")) return rc;
    *out = nullptr;
    return guarded([&] {
        auto handle = std::make_unique<bpre_bank>();
        handle->cpp = bpre::read_csv_bank(path);
        *out = handle.release();
    });
}

bpre_status bpre_bank_generate(const char* spec_json, bpre_bank** out) {
    if (auto rc = require_arg(spec_json && out, "null argument")) return rc;
    *out = nullptr;
    return guarded([&] {
        const bpre::SynthSpec spec = bpre::synth_spec_from_json(spec_json);
        auto handle = std::make_unique<bpre_bank>();
        handle->cpp = bpre::generate_synthetic(spec);
        *out = handle.release();
    });
}

bpre_status bpre_bank_write(const bpre_bank* bank, const char* path,
                            uint64_t* bytes_out) {
    if (auto rc = require_arg(bank && path, "null argument")) return rc;
    return guarded([&] {
        const std::uint64_t bytes = bpre::write_bank(bank->cpp, path);
        if (bytes_out != nullptr) *bytes_out = bytes;
    });
}

void bpre_bank_destroy(bpre_bank* bank) { delete bank; }

uint32_t bpre_bank_dim(const bpre_bank* bank) { return bank ? bank->cpp.dim : 0; }

uint32_t bpre_bank_classes(const bpre_bank* bank) {
    return bank ? static_cast<uint32_t>(bank->cpp.num_classes()) : 0;
}

uint64_t bpre_bank_samples(const bpre_bank* bank) {
    return bank ? bank->cpp.samples.size() : 0;
}

uint64_t bpre_bank_labeled(const bpre_bank* bank) {
    return bank ? bank->cpp.labeled_count() : 0;
}

const char* bpre_bank_class_name(const bpre_bank* bank, uint32_t index) {
    if (bank == nullptr || index >= bank->cpp.class_names.size()) return nullptr;
    return bank->cpp.class_names[index].c_str();
}

/* ---- runs --------------------------------------------------------------- */

bpre_status bpre_run(const bpre_bank* bank, const bpre_config* config,
                     int keep_records, bpre_report** out) {
    if (auto rc = require_arg(bank && config && out, "null argument")) return rc;
    *out = nullptr;
    return guarded([&] {
        auto handle = std::make_unique<bpre_report>();
        handle->cpp = bpre::run_stream(bank->cpp.samples, bank->cpp.text_embeddings,
                                       config->cpp, keep_records != 0);
        handle->kept_records = keep_records != 0;
        *out = handle.release();
    });
}

bpre_status bpre_run_masked(const bpre_bank* bank, const bpre_config* config,
                            int use_sim, int use_conf, int use_div,
                            int keep_records, bpre_report** out) {
    if (auto rc = require_arg(bank && config && out, "null argument")) return rc;
    *out = nullptr;
    return guarded([&] {
        bpre::RewardMask mask{use_sim != 0, use_conf != 0, use_div != 0};
        auto handle = std::make_unique<bpre_report>();
        handle->cpp = bpre::run_ablation(bank->cpp.samples, bank->cpp.text_embeddings,
                                         config->cpp, mask, keep_records != 0);
        handle->kept_records = keep_records != 0;
        *out = handle.release();
    });
}

void bpre_report_destroy(bpre_report* report) { delete report; }

char* bpre_report_json(const bpre_report* report, int include_wall_time) {
    if (report == nullptr) return nullptr;
    return copy_string(bpre::report_to_json(report->cpp, include_wall_time != 0));
}

char* bpre_report_records_csv(const bpre_report* report) {
    if (report == nullptr || !report->kept_records) {
        g_last_error = "run did not keep per-sample records";
        return nullptr;
    }
    return copy_string(bpre::records_to_csv(report->cpp.records));
}

int bpre_report_has_accuracy(const bpre_report* report) {
    return report != nullptr && report->cpp.has_accuracy() ? 1 : 0;
}

double bpre_report_accuracy(const bpre_report* report) {
    if (report == nullptr || !report->cpp.has_accuracy()) return -1.0;
    return report->cpp.overall_accuracy;
}

uint64_t bpre_report_peak_state_scalars(const bpre_report* report) {
    return report ? report->cpp.peak_footprint.state_scalars() : 0;
}

uint64_t bpre_report_peak_scratch_scalars(const bpre_report* report) {
    return report ? report->cpp.peak_footprint.scratch_scalars : 0;
}

bpre_status bpre_report_checkpoint(const bpre_report* report,
                                   const bpre_bank* source_bank, const char* path) {
    if (auto rc = require_arg(report && source_bank && path, "null argument")) return rc;
    return guarded([&] {
        const bpre::EmbeddingBank snapshot = bpre::snapshot_from_prototypes(
            report->cpp.final_bank, source_bank->cpp.class_names);
        bpre::write_bank(snapshot, path);
    });
}

/* ---- streaming engine --------------------------------------------------- */

bpre_status bpre_engine_create(const bpre_bank* bank, const bpre_config* config,
                               bpre_engine** out) {
    if (auto rc = require_arg(bank && config && out, "null argument")) return rc;
    *out = nullptr;
    return guarded([&] {
        auto handle = std::make_unique<bpre_engine>();
        handle->cpp = std::make_unique<bpre::Engine>(bank->cpp.text_embeddings,
                                                     config->cpp);
        *out = handle.release();
    });
}

void bpre_engine_destroy(bpre_engine* engine) { delete engine; }

bpre_status bpre_engine_step(bpre_engine* engine, const double* views,
                             uint32_t n_views, int64_t sample_id,
                             int32_t* predicted_out, double* r_final_out) {
    if (auto rc = require_arg(engine && views && predicted_out && n_views > 0,
                              "null argument or zero views")) {
        return rc;
    }
    return guarded([&] {
        const std::size_t dim = engine->cpp->dim();
        bpre::TestSample sample;
        sample.sample_id = sample_id;
        sample.view_features.reserve(n_views);
        for (uint32_t v = 0; v < n_views; ++v) {
            sample.view_features.emplace_back(views + static_cast<std::size_t>(v) * dim,
                                              views + static_cast<std::size_t>(v + 1) * dim);
        }
        const bpre::PredictionRecord record = engine->cpp->step(sample);
        *predicted_out = record.predicted;
        if (r_final_out != nullptr) *r_final_out = record.reward.r_final;
    });
}

uint64_t bpre_engine_steps(const bpre_engine* engine) {
    return engine ? engine->cpp->global_step() : 0;
}

uint64_t bpre_engine_state_scalars(const bpre_engine* engine) {
    return engine ? engine->cpp->footprint().state_scalars() : 0;
}

uint64_t bpre_engine_peak_state_scalars(const bpre_engine* engine) {
    return engine ? engine->cpp->peak_footprint().state_scalars() : 0;
}

}  // extern "C"
