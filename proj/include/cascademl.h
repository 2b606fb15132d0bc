/* cascademl C API
 *
 * Multi-label classification toolkit: boosted cascades of
 * prediction-conditioned classifier levels with class-rebalancing and
 * difficulty-weighted resampling, per-class ROC-AUC evaluation, and a
 * synthetic multi-label data generator.
 *
 * All objects are opaque handles created and destroyed through this API.
 * Every fallible function returns a cml_status; on failure,
 * cml_last_error() returns a thread-local description of what went wrong.
 * Strings returned through char** out-parameters are heap-allocated and
 * must be released with cml_string_free().
 */

#ifndef CASCADEML_H
#define CASCADEML_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CML_API __declspec(dllexport)
#else
#define CML_API __attribute__((visibility("default")))
#endif

typedef enum cml_status {
  CML_OK = 0,
  CML_ERR_CHECK_FAILED = 1, /* a verification (e.g. gradcheck) did not pass */
  CML_ERR_INVALID = 2,      /* bad arguments, config, file contents, state */
  CML_ERR_NUMERIC = 3       /* non-finite values, divergence */
} cml_status;

typedef struct cml_dataset cml_dataset;
typedef struct cml_model cml_model;
typedef struct cml_report cml_report;

/* Message for the most recent failure on this thread; never NULL. */
CML_API const char* cml_last_error(void);

CML_API void cml_string_free(char* s);

CML_API const char* cml_version(void);

/* ---- datasets ---------------------------------------------------------- */

/* Generates a synthetic train/test pair from a SynthSpec JSON document. */
CML_API cml_status cml_generate(const char* spec_json, cml_dataset** train_out,
                                cml_dataset** test_out);

CML_API cml_status cml_dataset_read_csv(const char* path, cml_dataset** out);
CML_API cml_status cml_dataset_write_csv(const cml_dataset* dataset,
                                         const char* path);

CML_API int64_t cml_dataset_num_examples(const cml_dataset* dataset);
CML_API int64_t cml_dataset_num_features(const cml_dataset* dataset);
CML_API int64_t cml_dataset_num_classes(const cml_dataset* dataset);

/* Per-class totals plus the co-occurrence matrix, as an aligned text table. */
CML_API cml_status cml_dataset_stats_text(const cml_dataset* dataset,
                                          char** out);

/* Label-only ingestion of a ChestX-ray14-style metadata CSV (image id column
 * plus pipe-delimited findings column). class_names_csv is a comma-separated
 * list; pass NULL for the standard 14 thoracic disease names. */
CML_API cml_status cml_dataset_read_label_metadata(const char* path,
                                                   const char* class_names_csv,
                                                   cml_dataset** out);

CML_API void cml_dataset_free(cml_dataset* dataset);

/* ---- training ---------------------------------------------------------- */

typedef void (*cml_log_callback)(const char* line, void* user_data);

/* Trains a cascade per the ExperimentConfig JSON document on the given
 * training dataset. Progress lines go to the callback when it is non-NULL.
 * Deterministic: the same config and data produce the same model. */
CML_API cml_status cml_train(const char* config_json,
                             const cml_dataset* train_data,
                             cml_log_callback log_cb, void* user_data,
                             cml_model** out);

/* Atomic write (temp file + rename) of the checkpoint JSON. */
CML_API cml_status cml_model_save(const cml_model* model, const char* path);
CML_API cml_status cml_model_load(const char* path, cml_model** out);

CML_API int64_t cml_model_num_levels(const cml_model* model);
CML_API int64_t cml_model_num_classes(const cml_model* model);

/* Mean loss of the averaged ensemble over the training set, recorded at the
 * end of cml_train. Models loaded from disk report a negative value. */
CML_API double cml_model_final_train_loss(const cml_model* model);

/* Training log for one level as CSV (step, lr, total_loss, plus per-class
 * cross-entropy means for BR-CE runs). Only for models built by cml_train. */
CML_API cml_status cml_model_training_log_csv(const cml_model* model,
                                              int64_t level, char** out);

/* Difficulty ranking that selected the training draw of level `level`
 * (1 <= level < num_levels) as CSV: example_id, loss, rank, selection_prob. */
CML_API cml_status cml_model_ranking_csv(const cml_model* model, int64_t level,
                                         char** out);

/* Ensemble probabilities for a row-major feature block; out must hold
 * num_rows * num_classes doubles. */
CML_API cml_status cml_model_predict(const cml_model* model,
                                     const double* features, int64_t num_rows,
                                     int64_t num_features, double* out);

CML_API void cml_model_free(cml_model* model);

/* ---- evaluation -------------------------------------------------------- */

/* Per-class ROC-AUC report over a labeled dataset; with_per_level adds one
 * row per cascade level ahead of the ensemble row. */
CML_API cml_status cml_evaluate(const cml_model* model,
                                const cml_dataset* dataset, int with_per_level,
                                cml_report** out);

CML_API cml_status cml_report_text(const cml_report* report, char** out);
CML_API cml_status cml_report_csv(const cml_report* report, char** out);
CML_API cml_status cml_report_json(const cml_report* report, char** out);
CML_API double cml_report_macro_auc(const cml_report* report);
CML_API void cml_report_free(cml_report* report);

/* ---- verification and configuration ------------------------------------ */

/* Randomized analytic-vs-finite-difference gradient verification over both
 * loss families. Returns CML_OK when every draw stays under the tolerance,
 * CML_ERR_CHECK_FAILED otherwise. inject_fault deliberately corrupts one
 * gradient so callers can verify the check actually fails. */
CML_API cml_status cml_gradcheck(uint64_t seed, int inject_fault,
                                 char** report_out);

/* Default ExperimentConfig JSON with every supported leaf present. */
CML_API cml_status cml_default_config(char** out);

/* Parses + validates an ExperimentConfig document and echoes the fully
 * resolved form (defaults filled in). */
CML_API cml_status cml_resolve_config(const char* config_json, char** out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CASCADEML_H */
