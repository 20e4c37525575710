// Command-line front end. Talks to the library only through lirls.h.
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lirls.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

void on_sigint(int) { lirls_request_stop(); }

void log_line(const char* line, void*) { std::fprintf(stderr, "[lirls] %s\n", line); }

int fail_with(lirls_status s) {
  std::fprintf(stderr, "lirls: %s: %s\n", lirls_status_string(s), lirls_last_error());
  return lirls_status_is_numerical(s) ? kExitNumerical : kExitUsage;
}

std::string list_keys() {
  std::string out = "configuration keys (key=value):\n";
  for (size_t i = 0; i < lirls_config_key_count(); ++i) {
    out += "  " + std::string(lirls_config_key_name(i));
    const std::string def = lirls_config_key_default(i);
    out += " [" + (def.empty() ? std::string("unset") : def) + "]  ";
    out += lirls_config_key_help(i);
    out += "\n";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix-free IRLS reconstruction with learned analysis priors"};
  app.require_subcommand(1);
  app.footer(list_keys());

  std::string config_file;
  int threads = 0;
  std::vector<std::string> assignments;
  const char* commands[][2] = {
      {"deblur", "non-blind deblurring of io.input with io.kernel"},
      {"sr", "super-resolution by degrade.scale"},
      {"demosaick", "Bayer demosaicking of a single-channel mosaic"},
      {"train", "learn the prior on a dataset"},
      {"diagnose", "convergence, rate-bound and adjoint diagnostics"},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--config", config_file, "key=value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--threads", threads, "worker threads (fallback: LIRLS_THREADS)")
        ->check(CLI::PositiveNumber);
    sub->add_option("assignments", assignments, "key=value overrides");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  lirls_config* cfg = nullptr;
  if (lirls_status s = lirls_config_create(&cfg); s != LIRLS_OK) return fail_with(s);
  struct Guard {
    lirls_config* c;
    ~Guard() { lirls_config_destroy(c); }
  } guard{cfg};

  if (!config_file.empty())
    if (lirls_status s = lirls_config_load(cfg, config_file.c_str()); s != LIRLS_OK)
      return fail_with(s);
  if (const char* env = std::getenv("LIRLS_THREADS"); env && *env && threads == 0)
    if (lirls_status s = lirls_config_set(cfg, "run.threads", env); s != LIRLS_OK)
      return fail_with(s);
  for (const auto& a : assignments)
    if (lirls_status s = lirls_config_assign(cfg, a.c_str()); s != LIRLS_OK) return fail_with(s);
  if (threads > 0)
    if (lirls_status s = lirls_config_set(cfg, "run.threads", std::to_string(threads).c_str());
        s != LIRLS_OK)
      return fail_with(s);

  size_t len = 0;
  lirls_config_resolved(cfg, nullptr, 0, &len);
  std::string resolved(len + 1, '\0');
  lirls_config_resolved(cfg, resolved.data(), resolved.size(), &len);
  resolved.resize(len);
  std::fprintf(stderr, "[lirls] resolved configuration:\n%s", resolved.c_str());

  std::signal(SIGINT, on_sigint);
  lirls_result* result = nullptr;
  const lirls_status s = lirls_run(cfg, command.c_str(), log_line, nullptr, &result);
  if (s != LIRLS_OK) return fail_with(s);
  for (size_t i = 0; i < lirls_result_entry_count(result); ++i)
    std::printf("%s: %s\n", lirls_result_key(result, i), lirls_result_value(result, i));
  const int code = lirls_result_exit_code(result);
  lirls_result_destroy(result);
  return code;
}
