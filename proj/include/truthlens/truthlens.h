/* SPDX-License-Identifier: Apache-2.0 */
#ifndef TRUTHLENS_TRUTHLENS_H
#define TRUTHLENS_TRUTHLENS_H

#include <stddef.h>
#include <stdint.h>

#if defined(TRUTHLENS_BUILDING)
#define TL_API __attribute__((visibility("default")))
#else
#define TL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every function returning tl_status leaves a message for tl_last_error()
 * (per thread) when it fails. Output parameters are untouched on failure. */
typedef enum tl_status {
  TL_OK = 0,
  TL_ERR_INVALID_ARGUMENT = 1,
  TL_ERR_IO = 2,
  TL_ERR_FORMAT = 3,
  TL_ERR_BAD_MAGIC = 4,
  TL_ERR_LENGTH_MISMATCH = 5,
  TL_ERR_NON_FINITE = 6,
  TL_ERR_VERSION_MISMATCH = 7,
  TL_ERR_MISSING_INPUT = 8,
  TL_ERR_MISALIGNED = 9,
  TL_ERR_INTERNAL = 10
} tl_status;

TL_API const char* tl_version(void);
TL_API const char* tl_last_error(void);
TL_API const char* tl_status_name(tl_status status);
/* Comma-separated task ids (F0..F5, F4-N3, F4-N4, A1..A3) and prompt ids. */
TL_API const char* tl_task_names(void);
TL_API const char* tl_prompt_names(void);

/* ---- knowledge base ---------------------------------------------------- */
typedef struct tl_kb tl_kb;
/* path == NULL loads the bundled city/country table. */
TL_API tl_status tl_kb_load(const char* path, tl_kb** out);
TL_API size_t tl_kb_size(const tl_kb* kb);
TL_API void tl_kb_free(tl_kb* kb);

/* ---- datasets ---------------------------------------------------------- */
typedef struct tl_dataset tl_dataset;
/* n == 0 selects the task's default size. kb may be NULL for A1-A3. */
TL_API tl_status tl_dataset_generate(const tl_kb* kb, const char* task, size_t n, uint64_t seed, tl_dataset** out);
TL_API tl_status tl_dataset_read_jsonl(const char* path, tl_dataset** out);
TL_API tl_status tl_dataset_write_jsonl(const tl_dataset* ds, const char* path);
TL_API tl_status tl_dataset_apply_prompt(tl_dataset* ds, const char* prompt_id);
TL_API tl_status tl_dataset_split(tl_dataset* ds, double train_fraction, uint64_t seed);
TL_API size_t tl_dataset_size(const tl_dataset* ds);
/* Borrowed pointer, valid until the dataset is modified or freed. */
TL_API const char* tl_dataset_text(const tl_dataset* ds, size_t i);
TL_API int tl_dataset_label(const tl_dataset* ds, size_t i);
/* 1 for train, 0 for test. */
TL_API int tl_dataset_is_train(const tl_dataset* ds, size_t i);
/* Counts items whose stored label disagrees with the label recomputed from
 * their metadata. */
TL_API tl_status tl_dataset_oracle_check(const tl_dataset* ds, const tl_kb* kb, size_t* mismatches);
TL_API void tl_dataset_free(tl_dataset* ds);

/* ---- activation batches ------------------------------------------------ */
typedef struct tl_batch tl_batch;
TL_API tl_status tl_batch_read(const char* path, tl_batch** out);
/* Copies n*d row-major floats and n ids. */
TL_API tl_status tl_batch_create(uint32_t layer, size_t n, size_t d, const float* data, const int64_t* ids,
                                 const char* task, const char* prompt, const char* model, tl_batch** out);
TL_API tl_status tl_batch_write(const tl_batch* batch, const char* path);
TL_API void tl_batch_shape(const tl_batch* batch, uint32_t* layer, size_t* n, size_t* d);
TL_API const float* tl_batch_data(const tl_batch* batch);
TL_API const int64_t* tl_batch_ids(const tl_batch* batch);
TL_API void tl_batch_free(tl_batch* batch);

/* ---- probes ------------------------------------------------------------ */
typedef struct tl_hyper {
  double learning_rate;
  double weight_decay;
  uint32_t steps;
  double beta1;
  double beta2;
  double epsilon;
} tl_hyper;
TL_API void tl_hyper_default(tl_hyper* hyper);

typedef struct tl_probe tl_probe;
/* Trains on every row of the batch; labels has one 0/1 entry per row.
 * hyper == NULL uses the defaults. */
TL_API tl_status tl_probe_train(const tl_batch* batch, const uint8_t* labels, const tl_hyper* hyper, uint64_t seed,
                                tl_probe** out);
TL_API tl_status tl_probe_load(const char* path, tl_probe** out);
TL_API tl_status tl_probe_save(const tl_probe* probe, const char* path);
TL_API size_t tl_probe_dim(const tl_probe* probe);
TL_API const float* tl_probe_weights(const tl_probe* probe);
/* Writes batch.n logits w.(h - mu) into out (capacity cap). */
TL_API tl_status tl_probe_logits(const tl_probe* probe, const tl_batch* batch, double* out, size_t cap);
TL_API void tl_probe_free(tl_probe* probe);

/* ---- metrics ----------------------------------------------------------- */
TL_API tl_status tl_auroc(const double* scores, const uint8_t* labels, size_t n, double* out);

/* ---- synthetic activations --------------------------------------------- */
/* spec_json is a synthetic spec object; writes the manifest and one
 * activation file per layer into dir. */
TL_API tl_status tl_synth_emit(const char* spec_json, const char* dir, size_t* files_written);

/* ---- experiment plans -------------------------------------------------- */
typedef struct tl_plan tl_plan;
TL_API tl_status tl_plan_load(const char* path, tl_plan** out);
TL_API tl_status tl_plan_from_json(const char* json, tl_plan** out);
TL_API tl_status tl_plan_set_paths(tl_plan* plan, const char* activations, const char* out);
TL_API tl_status tl_plan_set_seed(tl_plan* plan, uint64_t seed);
TL_API tl_status tl_plan_set_jobs(tl_plan* plan, unsigned jobs);
/* Task pair used by tl_run_polarity; NULL leaves a side unchanged. */
TL_API tl_status tl_plan_set_polarity(tl_plan* plan, const char* affirmative, const char* negated);
/* Comma-separated lists; NULL leaves the field unchanged. layers may be "all". */
TL_API tl_status tl_plan_set_lists(tl_plan* plan, const char* tasks, const char* prompts, const char* layers);
/* Returns a heap copy of the plan as JSON; release with tl_string_free. */
TL_API char* tl_plan_to_json(const tl_plan* plan);
TL_API void tl_plan_free(tl_plan* plan);
TL_API void tl_string_free(char* s);

/* Each run writes its tables and plots under the plan's output directory
 * and merges an entry into index.json. */
/* Trains (or reuses) one cached probe. If probe_path is non-NULL it receives
 * the probe file path; a buffer shorter than the path is INVALID_ARGUMENT. */
TL_API tl_status tl_run_train(const tl_plan* plan, const char* task, const char* prompt, uint32_t layer,
                              char* probe_path, size_t cap);
TL_API tl_status tl_run_sweep(const tl_plan* plan);
TL_API tl_status tl_run_xgen(const tl_plan* plan, const char* source);
TL_API tl_status tl_run_matrix(const tl_plan* plan, uint32_t layer);
TL_API tl_status tl_run_transfer(const tl_plan* plan, const char* task, const char* source_prompt,
                                 const char* target_prompt);
TL_API tl_status tl_run_polarity(const tl_plan* plan);
TL_API tl_status tl_run_project(const tl_plan* plan, uint32_t layer);
TL_API tl_status tl_run_similarity(const tl_plan* plan, const char* task, const char* prompt);
/* Runs the plan's operations list and writes a fresh index.json. */
TL_API tl_status tl_run_plan(const tl_plan* plan, size_t* operations_run);

#ifdef __cplusplus
}
#endif

#endif
