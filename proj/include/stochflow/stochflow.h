/* stochflow: learning stable stochastic dynamics from demonstrations.
 *
 * C interface over the C++ core. All functions return sf_status; on failure
 * sf_last_error() holds a one-line message (thread-local). Handles are opaque
 * and freed with the matching *_free function.
 */
#ifndef STOCHFLOW_H
#define STOCHFLOW_H

#include <stddef.h>
#include <stdint.h>

#if defined _WIN32 || defined __CYGWIN__
#define SF_API __declspec(dllexport)
#else
#define SF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sf_status {
  SF_OK = 0,
  SF_ERR_INVALID_ARG = 1,
  SF_ERR_IO = 2,
  SF_ERR_PARSE = 3,
  SF_ERR_DIM_MISMATCH = 4,
  SF_ERR_NUMERIC = 5,
  SF_ERR_UNSTABLE = 6,
  SF_ERR_DEGENERATE_DATA = 7,
  SF_ERR_SINGULAR = 8,
  SF_ERR_ORIGIN = 9
} sf_status;

typedef struct sf_dataset sf_dataset;
typedef struct sf_model sf_model;

SF_API const char* sf_status_name(sf_status status);
SF_API const char* sf_last_error(void);

/* ---- datasets (plain-text trajectory files, header "dim=<d> dt=<dt>") ---- */

SF_API sf_status sf_dataset_load(const char* path, sf_dataset** out);
SF_API sf_status sf_dataset_save(const sf_dataset* ds, const char* path);
SF_API void sf_dataset_free(sf_dataset* ds);
SF_API int sf_dataset_dim(const sf_dataset* ds);
SF_API int sf_dataset_count(const sf_dataset* ds);
SF_API double sf_dataset_dt(const sf_dataset* ds);
SF_API int sf_dataset_length(const sf_dataset* ds, int index);
/* out: length*dim doubles, one point per row */
SF_API sf_status sf_dataset_points(const sf_dataset* ds, int index, double* out);

typedef struct sf_synth_options {
  double dt;
  int length;   /* points per demonstration */
  double omega; /* cycle angular velocity, rad/s */
  double decay; /* point-to-point approach rate, 1/s */
} sf_synth_options;

SF_API void sf_synth_options_init(sf_synth_options* opts);

/* shape: line | sine | s-curve | circle | ellipse | lissajous */
SF_API sf_status sf_dataset_synth(const char* shape, int n_demos, double noise, uint64_t seed,
                                  const sf_synth_options* opts, sf_dataset** out);

/* ---- training ---- */

typedef struct sf_train_config {
  int epochs;
  double learning_rate;
  double beta1;
  double beta2;
  double adam_eps;
  int s_max;
  double grad_clip;
  uint64_t seed;
  int latent_kind; /* 0 linear, 1 cycle */
  int flow_pairs;
  int hidden_width;
  double plateau_tol;
  int plateau_window;
  double stability_margin;
} sf_train_config;

SF_API void sf_train_config_init(sf_train_config* cfg);

typedef struct sf_train_report {
  double initial_nll;
  double final_nll;
  int epochs_run;
  int aborted_non_finite;
} sf_train_report;

/* log_path (nullable): tab-separated per-epoch records. Progress is echoed to
 * stderr when the STOCHFLOW_LOG environment variable is >= 1. */
SF_API sf_status sf_train(const sf_dataset* data, const sf_train_config* cfg, const char* log_path,
                          sf_model** out_model, sf_train_report* out_report);

/* ---- models ---- */

SF_API sf_status sf_model_load(const char* path, sf_model** out);
SF_API sf_status sf_model_save(const sf_model* m, const char* path);
SF_API void sf_model_free(sf_model* m);
SF_API int sf_model_dim(const sf_model* m);
SF_API double sf_model_dt(const sf_model* m);
SF_API int sf_model_latent_kind(const sf_model* m);

/* out: (n_steps+1)*dim doubles, one point per row; noise_scale 0 is the
 * deterministic expected trajectory */
SF_API sf_status sf_model_generate(const sf_model* m, const double* y0, int dim, int n_steps,
                                   double noise_scale, uint64_t seed, double* out);

/* stride-1 trajectory log-likelihood; dt must match the model's sampling time */
SF_API sf_status sf_model_log_likelihood(const sf_model* m, const double* points, int len, int dim,
                                         double dt, double* out);

SF_API sf_status sf_model_stationary_log_density(const sf_model* m, const double* point, int dim,
                                                 double* out);

/* argmax_k log p(trajectory | model_k); ties break to the lowest index */
SF_API sf_status sf_model_classify(const sf_model* const* models, int n_models, const double* points,
                                   int len, int dim, double dt, int* out_index,
                                   double* out_log_likelihoods);

/* grid_min/grid_max/counts: dim entries each, last dimension fastest;
 * out: prod(counts) rows of [point, expected velocity] = 2*dim doubles */
SF_API sf_status sf_model_vector_field(const sf_model* m, const double* grid_min, const double* grid_max,
                                       const int* counts, double* out);

/* Noise-free reproduction from each demo's start for the demo's length,
 * compared against the demo. Arrays hold sf_dataset_count(data) values;
 * out_swept may be NULL (required to be NULL for dim != 2). */
SF_API sf_status sf_model_eval(const sf_model* m, const sf_dataset* data, double* out_dtw,
                               double* out_frechet, double* out_swept);

#ifdef __cplusplus
}
#endif

#endif /* STOCHFLOW_H */
