/* Exercises the C interface from plain C. Returns nonzero on failure. */
#include <stdio.h>
#include <string.h>

#include "lirls.h"

static int failures = 0;

#define EXPECT(cond)                                               \
  do {                                                             \
    if (!(cond)) {                                                 \
      fprintf(stderr, "%s:%d: failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                  \
    }                                                              \
  } while (0)

static void count_lines(const char* line, void* user) {
  (void)line;
  ++*(int*)user;
}

int main(void) {
  lirls_config* cfg = NULL;
  EXPECT(lirls_config_create(&cfg) == LIRLS_OK);
  EXPECT(lirls_config_assign(cfg, "solver.max_steps=20") == LIRLS_OK);
  EXPECT(lirls_config_assign(cfg, "no.such.key=1") == LIRLS_ERR_CONFIG);
  EXPECT(strstr(lirls_last_error(), "no.such.key") != NULL);
  EXPECT(lirls_config_set(cfg, "prior.p", "abc") == LIRLS_ERR_CONFIG);
  EXPECT(lirls_config_load(cfg, "/nonexistent/cfg.txt") == LIRLS_ERR_IO);
  EXPECT(lirls_config_create(NULL) == LIRLS_ERR_INVALID_ARGUMENT);

  char buf[8];
  size_t len = 0;
  EXPECT(lirls_config_get(cfg, "solver.max_steps", buf, sizeof buf, &len) == LIRLS_OK);
  EXPECT(len == 2 && strcmp(buf, "20") == 0);
  EXPECT(lirls_config_get(cfg, "prior.family", buf, 3, &len) == LIRLS_OK);
  EXPECT(len == 6 && buf[0] == '\0');
  EXPECT(lirls_config_resolved(cfg, NULL, 0, &len) == LIRLS_OK && len > 100);

  EXPECT(lirls_config_key_count() > 40);
  EXPECT(strcmp(lirls_config_key_name(0), "run.threads") == 0);
  EXPECT(lirls_config_key_name(100000) == NULL);

  /* diagnose on the built-in fixture, small and quick */
  EXPECT(lirls_config_assign(cfg, "diagnose.size=24") == LIRLS_OK);
  EXPECT(lirls_config_assign(cfg, "degrade.sigma=0.01") == LIRLS_OK);
  EXPECT(lirls_config_assign(cfg, "rate.lanczos_iterations=100") == LIRLS_OK);
  lirls_result* res = NULL;
  int lines = 0;
  EXPECT(lirls_run(cfg, "diagnose", count_lines, &lines, &res) == LIRLS_OK);
  EXPECT(res != NULL);
  EXPECT(lirls_result_exit_code(res) == 0);
  EXPECT(lirls_result_entry_count(res) > 5);
  int found = 0;
  for (size_t i = 0; i < lirls_result_entry_count(res); ++i)
    if (strcmp(lirls_result_key(res, i), "nu_ub") == 0) found = 1;
  EXPECT(found);
  EXPECT(lirls_result_key(res, 100000) == NULL);
  lirls_result_destroy(res);

  EXPECT(lirls_run(cfg, "frobnicate", NULL, NULL, &res) == LIRLS_ERR_CONFIG);
  EXPECT(lirls_config_assign(cfg, "io.input=/nonexistent.png") == LIRLS_OK);
  EXPECT(lirls_run(cfg, "deblur", NULL, NULL, &res) != LIRLS_OK);

  double px[12] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 0.0, 0.5};
  lirls_image *a = NULL, *b = NULL;
  EXPECT(lirls_image_create(1, 3, 4, px, &a) == LIRLS_OK);
  px[0] = 0.2;
  EXPECT(lirls_image_create(1, 3, 4, px, &b) == LIRLS_OK);
  size_t c, h, w;
  lirls_image_dims(a, &c, &h, &w);
  EXPECT(c == 1 && h == 3 && w == 4);
  EXPECT(lirls_image_data(a)[11] == 0.5);
  double db = 0.0;
  int inf = 1;
  EXPECT(lirls_image_psnr(a, b, 1.0, &db, &inf) == LIRLS_OK);
  EXPECT(inf == 0 && db > 30.0 && db < 31.0); /* mse 0.01/12 -> 30.79 dB */
  EXPECT(lirls_image_psnr(a, a, 1.0, &db, &inf) == LIRLS_OK && inf == 1);
  EXPECT(lirls_image_ssim(a, b, 1.0, &db) == LIRLS_ERR_DIMENSION);
  EXPECT(lirls_image_load("/nonexistent.png", &b) == LIRLS_ERR_IO);
  lirls_image_destroy(a);
  lirls_image_destroy(b);

  EXPECT(lirls_status_is_numerical(LIRLS_ERR_CONVERGENCE));
  EXPECT(!lirls_status_is_numerical(LIRLS_ERR_IO));
  EXPECT(strcmp(lirls_status_string(LIRLS_ERR_INTERRUPTED), "interrupted") == 0);
  lirls_request_stop();
  lirls_clear_stop();
  lirls_config_destroy(cfg);

  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  return failures ? 1 : 0;
}
