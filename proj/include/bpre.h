/* C interface to the bpre engine: opaque handles, status codes, and
 * JSON/CSV string outputs.  All functions are safe to call from multiple
 * threads as long as no handle is used concurrently; error messages are
 * per-thread. */
#ifndef BPRE_H
#define BPRE_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bpre_status {
    BPRE_OK = 0,
    BPRE_ERR_UNKNOWN = 1,
    BPRE_ERR_IO = 2,        /* file missing / unreadable / unwritable */
    BPRE_ERR_FORMAT = 3,    /* malformed or corrupt bank / fixture */
    BPRE_ERR_CONFIG = 4,    /* bad configuration or generator spec */
    BPRE_ERR_NO_LABELS = 5, /* operation requires a labeled bank */
    BPRE_ERR_DIMENSION = 6, /* mismatched vector dimensions */
    BPRE_ERR_DOMAIN = 7,    /* numerically invalid input */
    BPRE_ERR_STATE = 8      /* call not valid for the current state */
} bpre_status;

typedef struct bpre_config bpre_config;
typedef struct bpre_bank bpre_bank;
typedef struct bpre_report bpre_report;
typedef struct bpre_engine bpre_engine;

const char* bpre_version(void);

/* Message for the most recent failure on the calling thread.  Never NULL;
 * valid until the thread's next bpre call. */
const char* bpre_last_error(void);

/* Frees strings returned by the *_json / *_csv functions. */
void bpre_string_free(char* text);

/* ---- configuration ---------------------------------------------------- */

bpre_config* bpre_config_create(void); /* all defaults */
void bpre_config_destroy(bpre_config* config);

/* Keys are kebab-case field names ("tau-clip", "update-period", ...);
 * underscores are accepted, as are the shorthands M, K, and U. */
bpre_status bpre_config_set(bpre_config* config, const char* key, const char* value);
bpre_status bpre_config_load_file(bpre_config* config, const char* path);
bpre_status bpre_config_validate(const bpre_config* config);
char* bpre_config_json(const bpre_config* config);

/* ---- embedding banks --------------------------------------------------- */

bpre_status bpre_bank_open(const char* path, bpre_bank** out);
bpre_status bpre_bank_open_csv(const char* path, bpre_bank** out);

/* spec_json keys: classes, dim, n_per_class, views, class_separation,
 * sample_noise, view_noise, text_offset, drift_angle, seed. */
bpre_status bpre_bank_generate(const char* spec_json, bpre_bank** out);

/* Writes the binary bank plus its <path>.json manifest.  bytes_out (optional)
 * receives the binary byte count. */
bpre_status bpre_bank_write(const bpre_bank* bank, const char* path,
                            uint64_t* bytes_out);
void bpre_bank_destroy(bpre_bank* bank);

uint32_t bpre_bank_dim(const bpre_bank* bank);
uint32_t bpre_bank_classes(const bpre_bank* bank);
uint64_t bpre_bank_samples(const bpre_bank* bank);
uint64_t bpre_bank_labeled(const bpre_bank* bank);
/* NULL when index is out of range; pointer valid for the bank's lifetime. */
const char* bpre_bank_class_name(const bpre_bank* bank, uint32_t index);

/* ---- runs --------------------------------------------------------------- */

/* Adapts over the bank's sample stream in order.  keep_records controls
 * whether per-sample records are retained for bpre_report_records_csv. */
bpre_status bpre_run(const bpre_bank* bank, const bpre_config* config,
                     int keep_records, bpre_report** out);

/* Same, with reward components disabled by zeroing their weights. */
bpre_status bpre_run_masked(const bpre_bank* bank, const bpre_config* config,
                            int use_sim, int use_conf, int use_div,
                            int keep_records, bpre_report** out);

void bpre_report_destroy(bpre_report* report);

/* Deterministic JSON; pass include_wall_time = 0 for the canonical form that
 * is byte-identical across replays of the same inputs. */
char* bpre_report_json(const bpre_report* report, int include_wall_time);

/* CSV of per-sample records; fails with BPRE_ERR_STATE unless the run kept
 * records. */
char* bpre_report_records_csv(const bpre_report* report);

int bpre_report_has_accuracy(const bpre_report* report);
double bpre_report_accuracy(const bpre_report* report); /* -1.0 if unlabeled */
uint64_t bpre_report_peak_state_scalars(const bpre_report* report);
uint64_t bpre_report_peak_scratch_scalars(const bpre_report* report);

/* Persists the run's final adapted state as a bank: prototypes become the
 * text embeddings, cached samples become labeled single-view samples.
 * source_bank provides the class names. */
bpre_status bpre_report_checkpoint(const bpre_report* report,
                                   const bpre_bank* source_bank, const char* path);

/* ---- streaming engine --------------------------------------------------- */

/* The bank supplies text embeddings only; samples are fed via step. */
bpre_status bpre_engine_create(const bpre_bank* bank, const bpre_config* config,
                               bpre_engine** out);
void bpre_engine_destroy(bpre_engine* engine);

/* views: n_views x dim doubles, row-major, view 0 first.  predicted_out is
 * required; r_final_out is optional. */
bpre_status bpre_engine_step(bpre_engine* engine, const double* views,
                             uint32_t n_views, int64_t sample_id,
                             int32_t* predicted_out, double* r_final_out);

uint64_t bpre_engine_steps(const bpre_engine* engine);
uint64_t bpre_engine_state_scalars(const bpre_engine* engine);
uint64_t bpre_engine_peak_state_scalars(const bpre_engine* engine);

#ifdef __cplusplus
}
#endif

#endif /* BPRE_H */
