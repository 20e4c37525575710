#pragma once

#include <atomic>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lirls/config.hpp"
#include "lirls/training.hpp"

namespace lirls {

// Ordered key/value report of one command.
struct CommandOutcome {
  // 0 success, 2 numerical failure (cap exit, descent violation, adjoint defect).
  int exit_code = 0;
  std::vector<std::pair<std::string, std::string>> report;

  void add(const std::string& key, const std::string& value) { report.emplace_back(key, value); }
};

using LogFn = std::function<void(const std::string&)>;

// Commands: deblur, sr, demosaick, train, diagnose. Throws lirls::Error for
// usage, IO and unrecoverable numerical errors.
CommandOutcome run_command(const std::string& command, const RunConfig& cfg, const LogFn& log = {},
                           const std::atomic<bool>* stop = nullptr);

// Model described by the prior.* keys for an image with `channels` channels.
Model model_from_config(const RunConfig& cfg, std::size_t channels);
FilterBank bank_from_config(const RunConfig& cfg, PriorFamily family, std::size_t channels);
IrlsLimits limits_from_config(const RunConfig& cfg);
TrainConfig train_config_from(const RunConfig& cfg);

}  // namespace lirls
