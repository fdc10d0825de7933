/* C interface to the domain-convex-game laboratory.
 *
 * All functions return DCG_OK on success; on failure they return an
 * error code and dcg_last_error() describes the problem (thread-local).
 * JSON arguments are documented in the README.
 */
#ifndef DCG_H
#define DCG_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dcg_status {
    DCG_OK = 0,
    DCG_ERR_CONFIG = 2,  /* invalid configuration, manifest, or arguments */
    DCG_ERR_NUMERIC = 3, /* numeric failure (non-finite values, bad factorization, I/O) */
} dcg_status;

/* Message for the most recent failure on this thread; never NULL. */
const char* dcg_last_error(void);

/* Opaque handle over a generated multi-domain dataset. */
typedef struct dcg_dataset dcg_dataset;

/* Generate a dataset from a manifest JSON string and write it to a
 * directory (manifest.json + per-domain blobs). */
dcg_status dcg_generate_data(const char* manifest_json, const char* out_dir);

dcg_status dcg_dataset_open(const char* dir, dcg_dataset** out);
void dcg_dataset_close(dcg_dataset* ds);
/* JSON summary (domains, counts, shape) into caller buffer. */
dcg_status dcg_dataset_info(const dcg_dataset* ds, char* buf, size_t cap);

/* One leave-one-domain-out training run; writes metrics.csv,
 * result.json and checkpoint.bin under out_dir. */
dcg_status dcg_train(const dcg_dataset* ds, const char* config_json, int holdout_domain,
                     unsigned long long seed, const char* out_dir);

/* Augmented-domain diversity sweep over the given N grid. */
dcg_status dcg_sweep_diversity(const dcg_dataset* ds, const char* config_json,
                               int holdout_domain, const int* n_values, int n_count,
                               const char* out_dir);

/* All eight variants x all holdouts x configured seeds. */
dcg_status dcg_ablate(const dcg_dataset* ds, const char* config_json, const char* out_dir);

/* omega x k accuracy grid. */
dcg_status dcg_sensitivity(const dcg_dataset* ds, const char* config_json,
                           int holdout_domain, const double* omegas, int omega_count,
                           const int* ks, int k_count, const char* out_dir);

/* Meta-split / filter-scope discussion variants. */
dcg_status dcg_discussion(const dcg_dataset* ds, const char* config_json,
                          int holdout_domain, const char* out_dir);

/* Train once and dump the most/least discarded samples as images. */
dcg_status dcg_dump_filtered(const dcg_dataset* ds, const char* config_json,
                             int holdout_domain, unsigned long long seed, int count,
                             const char* out_dir);

/* Analytical oracle battery. Prints a pass/fail table to stdout and,
 * when json_out_path is non-NULL, writes a JSON report there.
 * *pass receives 1/0. */
dcg_status dcg_verify_oracles(unsigned long long seed, const char* json_out_path,
                              int* pass);

#ifdef __cplusplus
}
#endif

#endif /* DCG_H */
