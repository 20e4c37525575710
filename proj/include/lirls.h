/* C interface to the lirls reconstruction library.
 *
 * All objects are opaque handles created and destroyed through this API.
 * Functions returning lirls_status report failures through the status code;
 * lirls_last_error() then holds a message for the calling thread.
 */
#ifndef LIRLS_H
#define LIRLS_H

#include <stddef.h>

#if defined(_WIN32)
#define LIRLS_API __declspec(dllexport)
#else
#define LIRLS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lirls_status {
  LIRLS_OK = 0,
  LIRLS_ERR_DIMENSION = 1,
  LIRLS_ERR_DOMAIN = 2,
  LIRLS_ERR_DIVERGENCE = 3,
  LIRLS_ERR_CONVERGENCE = 4,
  LIRLS_ERR_MAJORIZER = 5,
  LIRLS_ERR_IO = 6,
  LIRLS_ERR_FORMAT = 7,
  LIRLS_ERR_CONFIG = 8,
  LIRLS_ERR_INTERRUPTED = 9,
  LIRLS_ERR_INVALID_ARGUMENT = 10,
  LIRLS_ERR_INTERNAL = 11
} lirls_status;

typedef struct lirls_config lirls_config;
typedef struct lirls_result lirls_result;
typedef struct lirls_image lirls_image;

typedef void (*lirls_log_fn)(const char* line, void* user);

LIRLS_API const char* lirls_version(void);
LIRLS_API const char* lirls_status_string(lirls_status status);
/* Message of the most recent failure on this thread; "" if none. */
LIRLS_API const char* lirls_last_error(void);
/* Nonzero for statuses that signal numerical failure rather than misuse. */
LIRLS_API int lirls_status_is_numerical(lirls_status status);

/* ---- configuration ---- */
LIRLS_API lirls_status lirls_config_create(lirls_config** out);
LIRLS_API void lirls_config_destroy(lirls_config* cfg);
LIRLS_API lirls_status lirls_config_load(lirls_config* cfg, const char* path);
/* "key=value" */
LIRLS_API lirls_status lirls_config_assign(lirls_config* cfg, const char* assignment);
LIRLS_API lirls_status lirls_config_set(lirls_config* cfg, const char* key, const char* value);
/* Copies the value (NUL terminated) when it fits; *length receives the
 * value length without the terminator either way. */
LIRLS_API lirls_status lirls_config_get(const lirls_config* cfg, const char* key, char* buffer,
                                        size_t capacity, size_t* length);
LIRLS_API lirls_status lirls_config_resolved(const lirls_config* cfg, char* buffer,
                                             size_t capacity, size_t* length);
LIRLS_API size_t lirls_config_key_count(void);
LIRLS_API const char* lirls_config_key_name(size_t index);
LIRLS_API const char* lirls_config_key_default(size_t index);
LIRLS_API const char* lirls_config_key_help(size_t index);

/* ---- commands ---- */
/* command: deblur | sr | demosaick | train | diagnose. On LIRLS_OK *out holds
 * the report; its exit code is 0 on success and 2 on numerical failure. */
LIRLS_API lirls_status lirls_run(const lirls_config* cfg, const char* command, lirls_log_fn log,
                                 void* user, lirls_result** out);
LIRLS_API int lirls_result_exit_code(const lirls_result* result);
LIRLS_API size_t lirls_result_entry_count(const lirls_result* result);
LIRLS_API const char* lirls_result_key(const lirls_result* result, size_t index);
LIRLS_API const char* lirls_result_value(const lirls_result* result, size_t index);
LIRLS_API void lirls_result_destroy(lirls_result* result);
/* Asks a running training command to stop at the next batch boundary. Only
 * stores to a lock-free atomic, so it may be called from a signal handler. */
LIRLS_API void lirls_request_stop(void);
LIRLS_API void lirls_clear_stop(void);

/* ---- images (planar, channel-major, doubles) ---- */
LIRLS_API lirls_status lirls_image_create(size_t channels, size_t height, size_t width,
                                          const double* data, lirls_image** out);
LIRLS_API lirls_status lirls_image_load(const char* path, lirls_image** out);
LIRLS_API lirls_status lirls_image_save(const lirls_image* image, const char* path);
LIRLS_API void lirls_image_dims(const lirls_image* image, size_t* channels, size_t* height,
                                size_t* width);
LIRLS_API const double* lirls_image_data(const lirls_image* image);
/* *infinite is set to 1 for bit-identical images (db is then 0). */
LIRLS_API lirls_status lirls_image_psnr(const lirls_image* a, const lirls_image* b, double peak,
                                        double* db, int* infinite);
LIRLS_API lirls_status lirls_image_ssim(const lirls_image* a, const lirls_image* b, double peak,
                                        double* value);
LIRLS_API void lirls_image_destroy(lirls_image* image);

#ifdef __cplusplus
}
#endif

#endif /* LIRLS_H */
