#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <iosfwd>
#include <string>
#include <vector>

#include "lirls/implicit_grad.hpp"
#include "lirls/irls.hpp"
#include "lirls/synthetic.hpp"

namespace lirls {

enum class Task { kDeblur, kSr, kDemosaick };

Task parse_task(const std::string& s);
std::string to_string(Task t);

struct TrainConfig {
  Task task = Task::kDeblur;
  std::size_t crop = 32;
  std::size_t batch = 8;
  std::size_t epochs = 30;
  std::size_t batches_per_epoch = 4;
  std::size_t validation_samples = 8;
  double lr = 5e-3;
  double lr_decay = 0.9;
  double noise_min = 0.0;
  double noise_max = 0.01;
  KernelKind kernel_kind = KernelKind::kGaussian;
  std::size_t kernel_size = 5;
  std::size_t sr_scale = 2;
  std::string cfa_pattern = "RGGB";
  std::uint64_t seed = 1;
  Trainables trainables{true, false, false};
  IrlsLimits forward = IrlsLimits::training();
  SolveConfig backward = backward_solve_config();
  double max_skip_fraction = 0.2;
  double peak = 1.0;
  // Border band excluded from the loss; unset picks the combined support of
  // the blur kernel and the filters (see loss_margin()).
  std::optional<std::size_t> loss_margin;
  std::size_t threads = 1;

  void validate() const;
};

struct DegradationSample {
  Image gt;
  OperatorPtr op;
  Vec y;
  double sigma = 0.0;
  Task task = Task::kDeblur;
  Kernel kernel;
};

// Random crop (and flips) of `image`, degraded by a seeded operator and
// Gaussian noise with sigma drawn uniformly from the configured range.
DegradationSample make_sample(const Image& image, const TrainConfig& cfg, std::uint64_t seed);

// Learnable state: the filter bank plus the prior specification, with p
// carried through its unconstrained raw value when learnable.
struct Model {
  FilterBank bank;
  PriorSpec prior;
  double p_raw = 0.0;  // meaningful when learn_p
  bool learn_p = false;

  double p() const { return learn_p ? p_from_raw(p_raw) : prior.p; }
  Problem problem_for(const DegradationSample& s) const;
};

struct AdamState {
  Vec m, v, v_max;
  std::uint64_t step = 0;
};

// One Adam step with the AMSGrad maximum (beta1 0.9, beta2 0.999, eps 1e-8).
void adam_amsgrad_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                       double lr);

// Flattened view of the trainable parameters in a fixed order: filter
// coefficients, weights, raw p.
Vec pack_parameters(const Model& m, const Trainables& t);
void unpack_parameters(std::span<const double> flat, Model& m, const Trainables& t);
// Weight projection after a step: non-negative, ascending for low-rank.
void project_weights(PriorSpec& prior);

struct Checkpoint {
  Model model;
  AdamState optimizer;
  std::size_t epoch = 0;  // completed epochs
  std::string rng_state;
  std::uint64_t seed = 0;
};

// "LIRLSCK1" container.
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const Checkpoint& c, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_psnr = 0.0;
  std::size_t skipped = 0;
  double wall_s = 0.0;
};

struct SampleOutcome {
  double loss = 0.0;
  double psnr = 0.0;
  bool skipped = false;
  GradientBundle grad;
};

std::size_t loss_margin(const TrainConfig& cfg, const DegradationSample& s, const FilterBank& bank);

// Forward solve, -PSNR loss and implicit backward pass for one sample.
SampleOutcome evaluate_sample(const Model& model, const DegradationSample& s,
                              const TrainConfig& cfg, bool with_gradient);

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: no files written
  std::size_t stop_after_epoch = 0;  // 0: run all epochs
  bool record_timing = false;
  std::function<void(const EpochLog&)> on_epoch;
  // Polled between batches; when it reads true the run stops with
  // ErrorCode::kInterrupted and the last complete checkpoint stays in place.
  const std::atomic<bool>* stop = nullptr;
};

struct TrainResult {
  Checkpoint final;
  std::vector<EpochLog> log;
};

std::vector<Image> load_dataset(const std::filesystem::path& dir);

// Runs (or resumes, when `start` is given) the bilevel training loop.
TrainResult train(const Checkpoint& start, const std::vector<Image>& dataset,
                  const TrainConfig& cfg, const TrainOptions& options = {});
Checkpoint initial_checkpoint(const Model& model, const TrainConfig& cfg);

// Trailing moving averages over `window` consecutive entries.
std::vector<double> moving_average(std::span<const double> values, std::size_t window);
// True when the moving average never increases (vacuously true for fewer
// than window + 1 entries).
bool moving_average_non_increasing(std::span<const double> values, std::size_t window);

void write_training_log(const std::vector<EpochLog>& log, std::ostream& out);

}  // namespace lirls
