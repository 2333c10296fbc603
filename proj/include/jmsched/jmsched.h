#ifndef JMSCHED_H
#define JMSCHED_H

/* C interface to the joint-model fitting and scheduling library.
 *
 * Every call returns a jms_status. On failure the message is available from
 * jms_last_error() on the same thread until the next failing call. Objects
 * returned through out-parameters belong to the caller and are released with
 * the matching *_free function; the free functions accept NULL. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(JMSCHED_BUILDING)
#define JMS_API __declspec(dllexport)
#else
#define JMS_API __declspec(dllimport)
#endif
#else
#define JMS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum jms_status {
    JMS_OK = 0,
    JMS_ERR_DOMAIN = 1,
    JMS_ERR_CONFIG = 2,
    JMS_ERR_NUMERIC = 3,
    JMS_ERR_PARSE = 4,
    JMS_ERR_DATA = 5,
    JMS_ERR_PRECONDITION = 6,
    JMS_ERR_IO = 7,
    JMS_ERR_NULL_ARGUMENT = 8,
    JMS_ERR_INTERNAL = 99
} jms_status;

typedef struct jms_config jms_config;   /* flat key=value settings */
typedef struct jms_dataset jms_dataset; /* subjects with measurements and follow-up */
typedef struct jms_model jms_model;     /* posterior draws of a fitted joint model */
typedef struct jms_plan jms_plan;       /* next-measurement plan for one subject */

JMS_API const char* jms_version(void);
JMS_API const char* jms_last_error(void);
JMS_API const char* jms_status_name(jms_status status);

/* ---- configuration */
JMS_API jms_status jms_config_new(jms_config** out);
JMS_API jms_status jms_config_load(const char* path, jms_config** out);
JMS_API jms_status jms_config_set(jms_config* config, const char* key, const char* value);
/* "key=value" */
JMS_API jms_status jms_config_override(jms_config* config, const char* assignment);
/* Copies the value into buffer (truncating to capacity, always terminated); *length gets the full length. */
JMS_API jms_status jms_config_get(const jms_config* config, const char* key, char* buffer, size_t capacity,
                                  size_t* length);
JMS_API void jms_config_free(jms_config* config);

/* ---- data */
JMS_API jms_status jms_dataset_read(const char* longitudinal_csv, const char* survival_csv, jms_dataset** out);
JMS_API jms_status jms_dataset_write(const jms_dataset* data, const char* longitudinal_csv, const char* survival_csv);
JMS_API jms_status jms_dataset_size(const jms_dataset* data, size_t* subjects, size_t* measurements);
/* Generates a dataset from the design in `config` (sim.*, truth.*, model.*, seed). */
JMS_API jms_status jms_simulate(const jms_config* config, jms_dataset** out);
/* Writes the true parameters of the design in `config` as key=value lines. */
JMS_API jms_status jms_write_truth(const jms_config* config, const char* path);
JMS_API void jms_dataset_free(jms_dataset* data);

/* ---- fitting */
/* Fits model.*, prior.* and mcmc.* settings; needs `seed`. */
JMS_API jms_status jms_fit(const jms_config* config, const jms_dataset* data, jms_model** out);
/* Writes draws.csv, model.cfg, diagnostics.txt and summary.txt into `directory`. */
JMS_API jms_status jms_model_save(const jms_model* model, const char* directory);
JMS_API jms_status jms_model_load(const char* directory, jms_model** out);
JMS_API jms_status jms_model_num_draws(const jms_model* model, size_t* draws);
JMS_API jms_status jms_model_num_parameters(const jms_model* model, size_t* count);
/* Posterior mean of the k-th scalar in draws.csv column order. */
JMS_API jms_status jms_model_posterior_mean(const jms_model* model, size_t k, double* mean);
JMS_API jms_status jms_model_converged(const jms_model* model, int* converged);
JMS_API jms_status jms_model_dic(const jms_model* model, double* dic, double* p_d);
/* Number of sampler flags, and the k-th flag copied like jms_config_get. */
JMS_API jms_status jms_model_num_flags(const jms_model* model, size_t* count);
JMS_API jms_status jms_model_flag(const jms_model* model, size_t k, char* buffer, size_t capacity, size_t* length);
JMS_API void jms_model_free(jms_model* model);

/* ---- prediction and scoring */
/* Cross-validated dynamic conditional likelihood at landmark t (score.*, seed). */
JMS_API jms_status jms_cv_dcl(const jms_model* model, const jms_dataset* data, double t, const jms_config* config,
                              double* value, int* n_at_risk);
/* Writes the score table for `count` models over `n_landmarks` landmarks. */
JMS_API jms_status jms_score_write(const jms_model* const* models, const char* const* names, size_t count,
                                   const jms_dataset* data, const double* landmarks, size_t n_landmarks,
                                   const jms_config* config, const char* path);
/* pi(u | t) at each u >= t for the named subject (schedule.pi_draws, seed). */
JMS_API jms_status jms_predict(const jms_model* model, const jms_dataset* data, const char* subject_id, double t,
                               const double* u, size_t n, const jms_config* config, double* pi);
JMS_API jms_status jms_write_curve(const char* path, const double* u, const double* pi, size_t n);

/* ---- scheduling */
JMS_API jms_status jms_schedule(const jms_model* model, const jms_dataset* data, const char* subject_id, double t,
                                const jms_config* config, jms_plan** out);
JMS_API jms_status jms_plan_size(const jms_plan* plan, size_t* points);
JMS_API jms_status jms_plan_horizon(const jms_plan* plan, double* t, double* t_up);
JMS_API jms_status jms_plan_point(const jms_plan* plan, size_t k, double* u, double* ekl, double* ekl_lo,
                                  double* ekl_hi, double* pi);
/* *index is -1 when no point is feasible. */
JMS_API jms_status jms_plan_selected(const jms_plan* plan, long* index);
JMS_API jms_status jms_plan_num_flags(const jms_plan* plan, size_t* count);
JMS_API jms_status jms_plan_flag(const jms_plan* plan, size_t k, char* buffer, size_t capacity, size_t* length);
JMS_API jms_status jms_plan_write(const jms_plan* plan, const char* path);
JMS_API void jms_plan_free(jms_plan* plan);

#ifdef __cplusplus
}
#endif

#endif
