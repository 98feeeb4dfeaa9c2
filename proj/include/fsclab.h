/* Copyright 2026 The fsclab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the fsclab core: data generation, hard-negative caption
 * generation, training, evaluation, weight interpolation, and trajectory
 * tables, plus read-only checkpoint inspection through an opaque handle.
 *
 * Conventions:
 *   - Every function returns fsc_status; FSC_OK is zero.
 *   - On failure, fsc_last_error() describes the most recent error on the
 *     calling thread; the pointer stays valid until the next failing call.
 *   - `config_json` parameters take a flat JSON object of run settings
 *     (see the project README for the key list); NULL or "" selects the
 *     documented defaults. Unknown keys are rejected.
 *   - All file outputs are written atomically (temp file + rename).
 *   - Strings returned through char** are heap-allocated; release them
 *     with fsc_string_free().
 */

#ifndef FSCLAB_H_
#define FSCLAB_H_

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fsc_status {
  FSC_OK = 0,
  FSC_ERR_CONFIG = 2,  /* bad configuration or arguments */
  FSC_ERR_RUNTIME = 3, /* training/evaluation failure (divergence, shape drift, ...) */
  FSC_ERR_IO = 4,      /* file system failure */
  FSC_ERR_CORRUPT = 5  /* unreadable checkpoint or data file */
} fsc_status;

/* Thread-local message for the last failure; never NULL. */
const char* fsc_last_error(void);

void fsc_string_free(char* s);

/* Writes a seeded scene dataset (JSONL) and, when suites_out is non-NULL,
 * the four evaluation suites (JSONL). Counts, seed, and grid come from
 * config keys n_train, n_eval, seed, grid. */
fsc_status fsc_gen_data(const char* config_json, const char* dataset_out,
                        const char* suites_out);

/* Reads a dataset (JSONL) and writes one hard-negative record per caption:
 * {"caption": ..., "negatives": [...], "valid": [...]}. */
fsc_status fsc_gen_negatives(const char* config_json, const char* dataset_in,
                             const char* out_path);

/* Trains on dataset_in per the config. init_ckpt (optional) warm-starts
 * the run and must carry a matching model digest. Writes the checkpoint to
 * ckpt_out and, when metrics_out is non-NULL, the per-step CSV log. */
fsc_status fsc_train(const char* config_json, const char* dataset_in,
                     const char* init_ckpt, const char* ckpt_out,
                     const char* metrics_out);

/* Evaluates a checkpoint on the suites; writes the metric report as JSON
 * and, when csv_out is non-NULL, as a one-row CSV. */
fsc_status fsc_eval(const char* config_json, const char* ckpt_in,
                    const char* suites_in, const char* json_out, const char* csv_out);

/* theta = (1 - alpha) * pre + alpha * ft, written to ckpt_out. */
fsc_status fsc_merge(const char* pre_in, const char* ft_in, double alpha,
                     const char* ckpt_out);

/* Evaluates the interpolation trajectory at alpha = 0.0, 0.1, ..., 1.0 and
 * writes a CSV table `alpha,Comp,ZS`. */
fsc_status fsc_plot_data(const char* config_json, const char* pre_in,
                         const char* ft_in, const char* suites_in,
                         const char* csv_out);

/* ------------------------------------------------------------------ */
/* Checkpoint inspection                                               */
/* ------------------------------------------------------------------ */

typedef struct fsc_checkpoint fsc_checkpoint;

fsc_status fsc_checkpoint_open(const char* path, fsc_checkpoint** out);
void fsc_checkpoint_close(fsc_checkpoint* ckpt);

/* Hash of the serialized checkpoint; equal files hash equal. */
fsc_status fsc_checkpoint_digest(const fsc_checkpoint* ckpt, uint64_t* out);

/* Metadata as a JSON object: step, seed, temperature, config_digest, and
 * alpha when the checkpoint came from an interpolation. */
fsc_status fsc_checkpoint_meta_json(const fsc_checkpoint* ckpt, char** out);

fsc_status fsc_checkpoint_tensor_count(const fsc_checkpoint* ckpt, uint64_t* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* FSCLAB_H_ */
