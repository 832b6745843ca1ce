#ifndef L2T_L2T_H
#define L2T_L2T_H

#include <stddef.h>
#include <stdint.h>

#if defined(L2T_BUILDING_LIBRARY)
#define L2T_API __attribute__((visibility("default")))
#else
#define L2T_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum l2t_status {
  L2T_OK = 0,
  L2T_ERR_INVALID_ARGUMENT = 1,
  L2T_ERR_CONFIG = 2,
  L2T_ERR_GATE = 3,
  L2T_ERR_IO = 4,
  L2T_ERR_FORMAT = 5,
  L2T_ERR_NUMERICAL = 6,
  L2T_ERR_INTERNAL = 7
} l2t_status;

typedef enum l2t_method { L2T_METHOD_IFGSM = 0, L2T_METHOD_MIFGSM = 1, L2T_METHOD_RAND = 2, L2T_METHOD_L2T = 3 } l2t_method;

typedef struct l2t_experiment l2t_experiment;
typedef struct l2t_model l2t_model;

/* Message of the last failed call on this thread ("" if none). */
L2T_API const char* l2t_last_error(void);
L2T_API const char* l2t_version(void);
L2T_API const char* l2t_status_name(l2t_status status);

/* ---- experiments ---- */

/* config_path may be NULL for the built-in defaults. */
L2T_API l2t_status l2t_experiment_create(const char* config_path, l2t_experiment** out);
L2T_API void l2t_experiment_free(l2t_experiment* exp);
L2T_API l2t_status l2t_experiment_set_seed(l2t_experiment* exp, uint64_t seed);
L2T_API l2t_status l2t_experiment_set_output_dir(l2t_experiment* exp, const char* dir);
/* jobs = 0 uses every hardware thread. */
L2T_API l2t_status l2t_experiment_set_jobs(l2t_experiment* exp, int jobs);
/* Writes the 16-hex-digit config hash plus a terminating NUL; buf needs 17 bytes. */
L2T_API l2t_status l2t_experiment_config_hash(const l2t_experiment* exp, char* buf, size_t buf_size);
/* Progress lines go to this callback (default: none). */
typedef void (*l2t_log_fn)(const char* line, void* user);
L2T_API l2t_status l2t_experiment_set_logger(l2t_experiment* exp, l2t_log_fn fn, void* user);

L2T_API l2t_status l2t_run_train_zoo(l2t_experiment* exp);
L2T_API l2t_status l2t_run_attack(l2t_experiment* exp, const char* method);
/* axis: "K", "L", "T" or "category-removal"; grid: comma-separated values or NULL for the config grid. */
L2T_API l2t_status l2t_run_ablate(l2t_experiment* exp, const char* axis, const char* grid);
L2T_API l2t_status l2t_run_oracle(l2t_experiment* exp);
L2T_API l2t_status l2t_run_report(l2t_experiment* exp);

/* ---- single models ---- */

L2T_API l2t_status l2t_model_load(const char* path, l2t_model** out);
L2T_API void l2t_model_free(l2t_model* model);
L2T_API l2t_status l2t_model_shape(const l2t_model* model, int* channels, int* height, int* width, int* num_classes);
/* image: channels*height*width values, channel-major. */
L2T_API l2t_status l2t_model_forward(const l2t_model* model, const double* image, size_t image_len, double* logits,
                                     size_t logits_len);
L2T_API l2t_status l2t_model_loss_grad(const l2t_model* model, const double* image, size_t image_len, int label,
                                       double* loss, double* grad, size_t grad_len);

#ifdef __cplusplus
}
#endif

#endif
