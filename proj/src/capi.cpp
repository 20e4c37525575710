#include "lirls.h"

#include <atomic>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "lirls/app.hpp"
#include "lirls/error.hpp"

struct lirls_config {
  lirls::RunConfig cfg;
};

struct lirls_result {
  lirls::CommandOutcome outcome;
};

struct lirls_image {
  lirls::Image image;
};

namespace {

thread_local std::string g_last_error;
std::atomic<bool> g_stop{false};
static_assert(std::atomic<bool>::is_always_lock_free);

lirls_status status_of(lirls::ErrorCode code) {
  using lirls::ErrorCode;
  switch (code) {
    case ErrorCode::kDimension: return LIRLS_ERR_DIMENSION;
    case ErrorCode::kDomain: return LIRLS_ERR_DOMAIN;
    case ErrorCode::kDivergence: return LIRLS_ERR_DIVERGENCE;
    case ErrorCode::kConvergence: return LIRLS_ERR_CONVERGENCE;
    case ErrorCode::kMajorizerViolation: return LIRLS_ERR_MAJORIZER;
    case ErrorCode::kIo: return LIRLS_ERR_IO;
    case ErrorCode::kFormat: return LIRLS_ERR_FORMAT;
    case ErrorCode::kConfig: return LIRLS_ERR_CONFIG;
    case ErrorCode::kInterrupted: return LIRLS_ERR_INTERRUPTED;
  }
  return LIRLS_ERR_INTERNAL;
}

template <class Fn>
lirls_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return LIRLS_OK;
  } catch (const lirls::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return LIRLS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LIRLS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return LIRLS_ERR_INTERNAL;
  }
}

lirls_status invalid(const char* what) {
  g_last_error = what;
  return LIRLS_ERR_INVALID_ARGUMENT;
}

lirls_status copy_out(const std::string& s, char* buffer, size_t capacity, size_t* length) {
  if (length) *length = s.size();
  if (buffer && capacity > s.size()) std::memcpy(buffer, s.c_str(), s.size() + 1);
  else if (buffer && capacity > 0) buffer[0] = '\0';
  return LIRLS_OK;
}

}  // namespace

extern "C" {

const char* lirls_version(void) { return "0.1.0"; }

const char* lirls_status_string(lirls_status status) {
  switch (status) {
    case LIRLS_OK: return "ok";
    case LIRLS_ERR_DIMENSION: return "dimension error";
    case LIRLS_ERR_DOMAIN: return "domain error";
    case LIRLS_ERR_DIVERGENCE: return "divergence";
    case LIRLS_ERR_CONVERGENCE: return "convergence error";
    case LIRLS_ERR_MAJORIZER: return "majorizer violation";
    case LIRLS_ERR_IO: return "io error";
    case LIRLS_ERR_FORMAT: return "format error";
    case LIRLS_ERR_CONFIG: return "config error";
    case LIRLS_ERR_INTERRUPTED: return "interrupted";
    case LIRLS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case LIRLS_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* lirls_last_error(void) { return g_last_error.c_str(); }

int lirls_status_is_numerical(lirls_status status) {
  return status == LIRLS_ERR_DIVERGENCE || status == LIRLS_ERR_CONVERGENCE ||
         status == LIRLS_ERR_MAJORIZER;
}

lirls_status lirls_config_create(lirls_config** out) {
  if (!out) return invalid("lirls_config_create: null output");
  return guarded([&] { *out = new lirls_config(); });
}

void lirls_config_destroy(lirls_config* cfg) { delete cfg; }

lirls_status lirls_config_load(lirls_config* cfg, const char* path) {
  if (!cfg || !path) return invalid("lirls_config_load: null argument");
  return guarded([&] { cfg->cfg.load_file(path); });
}

lirls_status lirls_config_assign(lirls_config* cfg, const char* assignment) {
  if (!cfg || !assignment) return invalid("lirls_config_assign: null argument");
  return guarded([&] { cfg->cfg.assign(assignment); });
}

lirls_status lirls_config_set(lirls_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return invalid("lirls_config_set: null argument");
  return guarded([&] { cfg->cfg.set(key, value); });
}

lirls_status lirls_config_get(const lirls_config* cfg, const char* key, char* buffer,
                              size_t capacity, size_t* length) {
  if (!cfg || !key) return invalid("lirls_config_get: null argument");
  std::string value;
  const lirls_status s = guarded([&] { value = cfg->cfg.raw(key); });
  return s == LIRLS_OK ? copy_out(value, buffer, capacity, length) : s;
}

lirls_status lirls_config_resolved(const lirls_config* cfg, char* buffer, size_t capacity,
                                   size_t* length) {
  if (!cfg) return invalid("lirls_config_resolved: null config");
  return copy_out(cfg->cfg.resolved(), buffer, capacity, length);
}

size_t lirls_config_key_count(void) { return lirls::RunConfig::keys().size(); }

const char* lirls_config_key_name(size_t index) {
  const auto& k = lirls::RunConfig::keys();
  return index < k.size() ? k[index].name.c_str() : nullptr;
}

const char* lirls_config_key_default(size_t index) {
  const auto& k = lirls::RunConfig::keys();
  return index < k.size() ? k[index].default_value.c_str() : nullptr;
}

const char* lirls_config_key_help(size_t index) {
  const auto& k = lirls::RunConfig::keys();
  return index < k.size() ? k[index].help.c_str() : nullptr;
}

lirls_status lirls_run(const lirls_config* cfg, const char* command, lirls_log_fn log, void* user,
                       lirls_result** out) {
  if (!cfg || !command || !out) return invalid("lirls_run: null argument");
  *out = nullptr;
  lirls::LogFn sink;
  if (log) sink = [log, user](const std::string& line) { log(line.c_str(), user); };
  return guarded([&] {
    auto r = std::make_unique<lirls_result>();
    r->outcome = lirls::run_command(command, cfg->cfg, sink, &g_stop);
    *out = r.release();
  });
}

int lirls_result_exit_code(const lirls_result* result) {
  return result ? result->outcome.exit_code : 1;
}

size_t lirls_result_entry_count(const lirls_result* result) {
  return result ? result->outcome.report.size() : 0;
}

const char* lirls_result_key(const lirls_result* result, size_t index) {
  if (!result || index >= result->outcome.report.size()) return nullptr;
  return result->outcome.report[index].first.c_str();
}

const char* lirls_result_value(const lirls_result* result, size_t index) {
  if (!result || index >= result->outcome.report.size()) return nullptr;
  return result->outcome.report[index].second.c_str();
}

void lirls_result_destroy(lirls_result* result) { delete result; }

void lirls_request_stop(void) { g_stop.store(true); }

void lirls_clear_stop(void) { g_stop.store(false); }

lirls_status lirls_image_create(size_t channels, size_t height, size_t width, const double* data,
                                lirls_image** out) {
  if (!out || (!data && channels * height * width > 0))
    return invalid("lirls_image_create: null argument");
  return guarded([&] {
    const lirls::Dims d{channels, height, width};
    *out = new lirls_image{lirls::Image(d, lirls::Vec(data, data + d.size()))};
  });
}

lirls_status lirls_image_load(const char* path, lirls_image** out) {
  if (!path || !out) return invalid("lirls_image_load: null argument");
  return guarded([&] { *out = new lirls_image{lirls::load_image(path)}; });
}

lirls_status lirls_image_save(const lirls_image* image, const char* path) {
  if (!image || !path) return invalid("lirls_image_save: null argument");
  return guarded([&] { lirls::save_image(image->image, path); });
}

void lirls_image_dims(const lirls_image* image, size_t* channels, size_t* height, size_t* width) {
  const lirls::Dims d = image ? image->image.dims() : lirls::Dims{};
  if (channels) *channels = d.channels;
  if (height) *height = d.height;
  if (width) *width = d.width;
}

const double* lirls_image_data(const lirls_image* image) {
  return image ? image->image.data().data() : nullptr;
}

lirls_status lirls_image_psnr(const lirls_image* a, const lirls_image* b, double peak, double* db,
                              int* infinite) {
  if (!a || !b || !db) return invalid("lirls_image_psnr: null argument");
  return guarded([&] {
    const lirls::Psnr p = lirls::psnr(a->image, b->image, peak);
    *db = p.infinite ? 0.0 : p.db;
    if (infinite) *infinite = p.infinite ? 1 : 0;
  });
}

lirls_status lirls_image_ssim(const lirls_image* a, const lirls_image* b, double peak,
                              double* value) {
  if (!a || !b || !value) return invalid("lirls_image_ssim: null argument");
  return guarded([&] { *value = lirls::ssim(a->image, b->image, peak); });
}

void lirls_image_destroy(lirls_image* image) { delete image; }

}  // extern "C"
