/*
 * C interface to the scar-detection pipeline.
 *
 * Objects are opaque handles created by the library and released with the
 * matching *_free function. Every fallible call returns a scar_status; on
 * failure scar_last_error() describes the problem (per thread, valid until
 * the next failing call on that thread). Output handles are only written
 * on success.
 */
#ifndef SCARFCN_H
#define SCARFCN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SCARFCN_BUILDING_LIBRARY)
#    define SCARFCN_API __declspec(dllexport)
#  else
#    define SCARFCN_API __declspec(dllimport)
#  endif
#else
#  define SCARFCN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define SCAR_SEGMENTS 18

typedef enum scar_status {
  SCAR_OK = 0,
  SCAR_ERR_CONFIG = 1,
  SCAR_ERR_INPUT = 2,
  SCAR_ERR_SHAPE = 3,
  SCAR_ERR_GENERATION = 4,
  SCAR_ERR_TRAINING = 5,
  SCAR_ERR_CHECKPOINT = 6,
  SCAR_ERR_IO = 7,
  SCAR_ERR_INTERNAL = 8
} scar_status;

typedef enum scar_padding {
  SCAR_PADDING_UNSET = -1,
  SCAR_PADDING_NONE = 0,
  SCAR_PADDING_HORIZONTAL = 1
} scar_padding;

typedef enum scar_optimizer { SCAR_OPTIMIZER_ADAM = 0, SCAR_OPTIMIZER_SGD = 1 } scar_optimizer;

typedef enum scar_split_part {
  SCAR_SPLIT_ALL = 0,
  SCAR_SPLIT_TRAIN = 1,
  SCAR_SPLIT_VAL = 2,
  SCAR_SPLIT_TEST = 3
} scar_split_part;

typedef enum scar_level {
  SCAR_LEVEL_PATIENT = 0,
  SCAR_LEVEL_LAD = 1,
  SCAR_LEVEL_LCX = 2,
  SCAR_LEVEL_RCA = 3,
  SCAR_LEVEL_SEGMENT = 4
} scar_level;

typedef struct scar_cohort scar_cohort;
typedef struct scar_dataset scar_dataset;
typedef struct scar_model scar_model;
typedef struct scar_report scar_report;

SCARFCN_API const char* scar_version(void);
SCARFCN_API const char* scar_last_error(void);
SCARFCN_API const char* scar_status_name(scar_status status);

/* ------------------------------------------------------------- cohort */

typedef struct scar_cohort_config {
  uint64_t seed;
  int32_t n_raw;
  double p_mi;
  double noise_sigma;
  double gls_min;
  double gls_max;
  double min_activation_delay;
  double frame_rate_hz;
  int32_t threads;
} scar_cohort_config;

SCARFCN_API void scar_cohort_config_default(scar_cohort_config* cfg);
SCARFCN_API scar_status scar_cohort_generate(const scar_cohort_config* cfg, scar_cohort** out);
SCARFCN_API scar_status scar_cohort_save(const scar_cohort* cohort, const char* dir);
SCARFCN_API scar_status scar_cohort_load(const char* dir, scar_cohort** out);
SCARFCN_API int32_t scar_cohort_size(const scar_cohort* cohort);
SCARFCN_API int32_t scar_cohort_raw_count(const scar_cohort* cohort);
SCARFCN_API double scar_cohort_scarred_fraction(const scar_cohort* cohort);
/* Copies the 18 labels of patient `index`. */
SCARFCN_API scar_status scar_cohort_labels(const scar_cohort* cohort, int32_t index,
                                           int32_t labels[SCAR_SEGMENTS]);
SCARFCN_API void scar_cohort_free(scar_cohort* cohort);

/* --------------------------------------------------------- preprocess */

typedef struct scar_resample_config {
  int32_t n_points;
  double systole_fraction;
  scar_padding padding; /* recorded in the dataset manifest unless UNSET */
  int32_t threads;
} scar_resample_config;

SCARFCN_API void scar_resample_config_default(scar_resample_config* cfg);
SCARFCN_API scar_status scar_preprocess(const scar_cohort* cohort, const scar_resample_config* cfg,
                                        scar_dataset** out);
SCARFCN_API scar_status scar_dataset_save(const scar_dataset* ds, const char* dir);
SCARFCN_API scar_status scar_dataset_load(const char* dir, scar_dataset** out);
SCARFCN_API int32_t scar_dataset_size(const scar_dataset* ds);
SCARFCN_API int32_t scar_dataset_points(const scar_dataset* ds);
SCARFCN_API scar_padding scar_dataset_padding(const scar_dataset* ds);
/* Hash of the source cohort's patients.jsonl (16 hex digits). */
SCARFCN_API const char* scar_dataset_source_hash(const scar_dataset* ds);
/* Patient id and labels at row `index`; `labels` may be NULL. */
SCARFCN_API scar_status scar_dataset_patient(const scar_dataset* ds, int32_t index, int32_t* patient_id,
                                             int32_t labels[SCAR_SEGMENTS]);
/* Row of the patient with the given id, or -1. */
SCARFCN_API int32_t scar_dataset_find(const scar_dataset* ds, int32_t patient_id);
SCARFCN_API void scar_dataset_free(scar_dataset* ds);

/* ----------------------------------------------------------- training */

typedef struct scar_split_config {
  double test_fraction;
  double val_fraction_of_dev;
  double scale;
  uint64_t seed;
} scar_split_config;

typedef struct scar_train_config {
  int32_t epochs;
  int32_t batch_size;
  double lr;
  double pos_weight;
  scar_padding padding;
  scar_optimizer optimizer;
  uint64_t seed;
  int32_t threads;
  int32_t deterministic;
} scar_train_config;

typedef struct scar_split_sizes {
  int32_t train;
  int32_t val;
  int32_t test;
} scar_split_sizes;

SCARFCN_API void scar_split_config_default(scar_split_config* cfg);
SCARFCN_API void scar_train_config_default(scar_train_config* cfg);
SCARFCN_API scar_status scar_split_sizes_compute(const scar_dataset* ds, const scar_split_config* split,
                                                 scar_split_sizes* out);

/* Trains on the stratified split of `ds`. `log_csv_path` may be NULL;
 * `best_model` may be NULL when the best-validation weights are not wanted.
 * `progress` (may be NULL) is called after every epoch. */
typedef void (*scar_epoch_callback)(int32_t epoch, double train_loss, double val_loss,
                                    double val_balanced_accuracy, void* user);
SCARFCN_API scar_status scar_train(const scar_dataset* ds, const scar_split_config* split,
                                   const scar_train_config* cfg, const char* log_csv_path,
                                   scar_epoch_callback progress, void* user,
                                   scar_model** final_model, scar_model** best_model);

SCARFCN_API scar_status scar_model_save(const scar_model* model, const char* path);
SCARFCN_API scar_status scar_model_load(const char* path, scar_model** out);
SCARFCN_API scar_padding scar_model_padding(const scar_model* model);
SCARFCN_API int32_t scar_model_points(const scar_model* model);
SCARFCN_API size_t scar_model_parameter_count(const scar_model* model);
/* Split recorded at training time; SCAR_ERR_INPUT if the model has none. */
SCARFCN_API scar_status scar_model_split_config(const scar_model* model, scar_split_config* out);
SCARFCN_API scar_status scar_model_predict(const scar_model* model, const scar_dataset* ds,
                                           int32_t patient_index, int32_t predicted[SCAR_SEGMENTS],
                                           double scores[SCAR_SEGMENTS]);
SCARFCN_API void scar_model_free(scar_model* model);

/* --------------------------------------------------------- evaluation */

typedef struct scar_level_metrics {
  int64_t tp, fp, tn, fn;
  double accuracy;
  double balanced_accuracy;
  double sensitivity;
  double specificity;
} scar_level_metrics;

/* Fails with SCAR_ERR_CONFIG when the model and dataset disagree on padding
 * mode or time points. `split` may be NULL for SCAR_SPLIT_ALL. */
SCARFCN_API scar_status scar_evaluate(const scar_model* model, const scar_dataset* ds,
                                      const scar_split_config* split, scar_split_part part,
                                      int32_t threads, scar_report** out);
/* `grid_json`: {"scales":[..],"paddings":[..],"seeds":[..],"train":{..},"split":{..}} */
SCARFCN_API scar_status scar_run_ablation(const scar_dataset* ds, const char* grid_json,
                                          int32_t threads, scar_report** out);
SCARFCN_API int32_t scar_report_cell_count(const scar_report* report);
SCARFCN_API scar_status scar_report_level(const scar_report* report, int32_t cell, scar_level level,
                                          scar_level_metrics* out);
SCARFCN_API const char* scar_report_json(const scar_report* report);
SCARFCN_API const char* scar_report_text(const scar_report* report);
SCARFCN_API scar_status scar_report_save(const scar_report* report, const char* dir);
SCARFCN_API void scar_report_free(scar_report* report);

/* --------------------------------------------------------------- misc */

/* Binary metrics for one confusion matrix (same convention as reports). */
SCARFCN_API scar_level_metrics scar_metrics_from_counts(int64_t tp, int64_t fp, int64_t tn, int64_t fn);

/* Bull's-eye SVG. `scores` and `labels` may be NULL. */
SCARFCN_API scar_status scar_render_svg(const int32_t predicted[SCAR_SEGMENTS], const double* scores,
                                        const int32_t* labels, const char* title,
                                        const char* out_path);

#ifdef __cplusplus
}
#endif

#endif /* SCARFCN_H */
