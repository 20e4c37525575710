#include "lirls/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include "lirls/error.hpp"

namespace lirls {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
// Problems need sigma > 0; noiseless samples are solved at this level.
constexpr double kSigmaFloor = 1e-4;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 of a combined key
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double e) { return std::isfinite(e); });
}

}  // namespace

Task parse_task(const std::string& s) {
  if (s == "deblur") return Task::kDeblur;
  if (s == "sr") return Task::kSr;
  if (s == "demosaick") return Task::kDemosaick;
  fail(ErrorCode::kConfig, "unknown task '" + s + "' (deblur|sr|demosaick)");
}

std::string to_string(Task t) {
  switch (t) {
    case Task::kDeblur: return "deblur";
    case Task::kSr: return "sr";
    case Task::kDemosaick: return "demosaick";
  }
  return "deblur";
}

void TrainConfig::validate() const {
  require(crop >= 8 && batch >= 1 && epochs >= 1 && batches_per_epoch >= 1, ErrorCode::kConfig,
          "train: crop, batch, epochs and batches_per_epoch must be positive (crop >= 8)");
  require(lr >= 0.0 && lr_decay > 0.0, ErrorCode::kConfig, "train: lr must be >= 0, decay > 0");
  require(noise_min >= 0.0 && noise_min <= noise_max && noise_max <= 0.03, ErrorCode::kConfig,
          "train: noise range must lie within [0, 0.03]");
  require(task == Task::kDemosaick || kernel_size + 4 <= crop, ErrorCode::kConfig,
          "train: crop too small for the kernel support");
  require(!(trainables.filters && trainables.weights), ErrorCode::kConfig,
          "train: filters and weights cannot be learned together");
  require(max_skip_fraction >= 0.0 && max_skip_fraction <= 1.0, ErrorCode::kConfig,
          "train: max_skip_fraction must lie in [0, 1]");
  require(threads >= 1, ErrorCode::kConfig, "train: threads must be >= 1");
}

DegradationSample make_sample(const Image& image, const TrainConfig& cfg, std::uint64_t seed) {
  require(image.height() >= cfg.crop && image.width() >= cfg.crop, ErrorCode::kDimension,
          "make_sample: image " + to_string(image.dims()) + " smaller than crop " +
              std::to_string(cfg.crop));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> oy(0, image.height() - cfg.crop);
  std::uniform_int_distribution<std::size_t> ox(0, image.width() - cfg.crop);
  const std::size_t top = oy(rng), left = ox(rng);
  const bool flip_h = rng() & 1U, flip_v = rng() & 1U;

  DegradationSample s;
  s.task = cfg.task;
  const std::size_t c = image.channels();
  s.gt = Image({c, cfg.crop, cfg.crop});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < cfg.crop; ++i)
      for (std::size_t j = 0; j < cfg.crop; ++j) {
        const std::size_t si = flip_v ? cfg.crop - 1 - i : i;
        const std::size_t sj = flip_h ? cfg.crop - 1 - j : j;
        s.gt.at(ch, i, j) = image.at(ch, top + si, left + sj);
      }

  const std::uint64_t kernel_seed = rng();
  switch (cfg.task) {
    case Task::kDeblur:
      s.kernel = synth_kernel(cfg.kernel_kind, cfg.kernel_size, kernel_seed);
      s.op = std::make_shared<BlurOperator>(s.kernel, s.gt.dims());
      break;
    case Task::kSr:
      s.kernel = synth_kernel(cfg.kernel_kind, cfg.kernel_size, kernel_seed);
      s.op = std::make_shared<SrOperator>(s.kernel, cfg.sr_scale, s.gt.dims());
      break;
    case Task::kDemosaick:
      require(c == 3, ErrorCode::kDimension, "make_sample: demosaicking needs colour images");
      s.op = std::make_shared<CfaOperator>(cfg.cfa_pattern, cfg.crop, cfg.crop);
      break;
  }
  std::uniform_real_distribution<double> uni(cfg.noise_min, cfg.noise_max);
  s.sigma = cfg.noise_max > cfg.noise_min ? uni(rng) : cfg.noise_min;
  s.y = s.op->apply(s.gt.span());
  if (s.sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, s.sigma);
    for (auto& v : s.y) v += noise(rng);
  }
  return s;
}

Problem Model::problem_for(const DegradationSample& s) const {
  Problem p;
  p.forward = s.op;
  p.y = s.y;
  p.sigma = std::max(s.sigma, kSigmaFloor);
  p.bank = std::make_shared<FilterBank>(bank);
  p.prior = prior;
  p.prior.p = this->p();
  return p;
}

void adam_amsgrad_step(std::span<double> params, std::span<const double> grads, AdamState& st,
                       double lr) {
  require(params.size() == grads.size(), ErrorCode::kDimension, "adam: size mismatch");
  require(all_finite(grads), ErrorCode::kDivergence, "adam: non-finite gradient rejected");
  const std::size_t n = params.size();
  if (st.m.size() != n) {
    require(st.step == 0, ErrorCode::kDimension, "adam: state does not match the parameters");
    st.m.assign(n, 0.0);
    st.v.assign(n, 0.0);
    st.v_max.assign(n, 0.0);
  }
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double bc1 = 1.0 - std::pow(kBeta1, t);
  const double bc2 = 1.0 - std::pow(kBeta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    st.m[i] = kBeta1 * st.m[i] + (1.0 - kBeta1) * grads[i];
    st.v[i] = kBeta2 * st.v[i] + (1.0 - kBeta2) * grads[i] * grads[i];
    st.v_max[i] = std::max(st.v_max[i], st.v[i]);
    const double denom = std::sqrt(st.v_max[i]) / std::sqrt(bc2) + kAdamEps;
    params[i] -= lr / bc1 * st.m[i] / denom;
  }
}

Vec pack_parameters(const Model& m, const Trainables& t) {
  Vec flat;
  if (t.filters) flat.insert(flat.end(), m.bank.coeffs().begin(), m.bank.coeffs().end());
  if (t.weights) flat.insert(flat.end(), m.prior.weights.begin(), m.prior.weights.end());
  if (t.p) flat.push_back(m.p_raw);
  return flat;
}

void unpack_parameters(std::span<const double> flat, Model& m, const Trainables& t) {
  std::size_t k = 0;
  auto take = [&](Vec& dst) {
    require(k + dst.size() <= flat.size(), ErrorCode::kDimension, "unpack: too few parameters");
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), dst.size(), dst.begin());
    k += dst.size();
  };
  if (t.filters) take(m.bank.coeffs());
  if (t.weights) take(m.prior.weights);
  if (t.p) {
    require(k < flat.size(), ErrorCode::kDimension, "unpack: missing p");
    m.p_raw = flat[k++];
  }
  require(k == flat.size(), ErrorCode::kDimension, "unpack: too many parameters");
}

void project_weights(PriorSpec& prior) {
  for (auto& w : prior.weights) w = std::max(w, 0.0);
  if (prior.family == PriorFamily::kLowRank)
    for (std::size_t j = 1; j < prior.weights.size(); ++j)
      prior.weights[j] = std::max(prior.weights[j], prior.weights[j - 1]);
}

std::size_t loss_margin(const TrainConfig& cfg, const DegradationSample& s, const FilterBank& bank) {
  if (cfg.loss_margin) return *cfg.loss_margin;
  const std::size_t k = s.kernel.height > 0 ? s.kernel.height - 1 : 0;
  return k + (bank.kh() > 0 ? bank.kh() - 1 : 0);
}

SampleOutcome evaluate_sample(const Model& model, const DegradationSample& s,
                              const TrainConfig& cfg, bool with_gradient) {
  SampleOutcome out;
  const Problem problem = model.problem_for(s);
  try {
    const Image x0 = initial_estimate(problem);
    const IrlsState st = irls_solve(problem, x0.data(), cfg.forward);
    if (!st.converged) {
      out.skipped = true;
      return out;
    }
    const LossValue lv = negative_psnr_loss(st.x, s.gt.span(), problem.x_dims(),
                                           loss_margin(cfg, s, model.bank), cfg.peak);
    out.loss = lv.loss;
    out.psnr = -lv.loss;
    if (with_gradient) {
      Trainables t = cfg.trainables;
      t.p = t.p && model.learn_p;
      out.grad = implicit_loss_grad(problem, st.x, lv.grad, t, cfg.backward);
      if (!out.grad.adjoint_report.converged) out.skipped = true;
      out.grad.d_p *= model.learn_p ? dp_draw(model.p_raw) : 0.0;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kConvergence && e.code() != ErrorCode::kDivergence) throw;
    out.skipped = true;
  }
  return out;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers; results are written
// by index, so the outcome does not depend on the worker count.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string serialise_rng(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

Checkpoint initial_checkpoint(const Model& model, const TrainConfig& cfg) {
  Checkpoint c;
  c.model = model;
  c.seed = cfg.seed;
  c.rng_state = serialise_rng(std::mt19937_64(cfg.seed));
  return c;
}

std::vector<Image> load_dataset(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), ErrorCode::kIo,
          "dataset directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".png" || ext == ".pfm")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorCode::kIo, "dataset directory has no PNG/PFM images: " + dir.string());
  std::vector<Image> images;
  for (const auto& f : files) images.push_back(load_image(f));
  return images;
}

std::vector<double> moving_average(std::span<const double> values, std::size_t window) {
  require(window >= 1, ErrorCode::kDomain, "moving_average: window must be >= 1");
  std::vector<double> out;
  for (std::size_t i = 0; i + window <= values.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < window; ++j) s += values[i + j];
    out.push_back(s / static_cast<double>(window));
  }
  return out;
}

bool moving_average_non_increasing(std::span<const double> values, std::size_t window) {
  const std::vector<double> ma = moving_average(values, window);
  for (std::size_t i = 1; i < ma.size(); ++i)
    if (ma[i] > ma[i - 1]) return false;
  return true;
}

void write_training_log(const std::vector<EpochLog>& log, std::ostream& out) {
  out << "epoch,train_loss,val_psnr,skipped,wall_s\n" << std::setprecision(17);
  for (const auto& e : log)
    out << e.epoch << ',' << e.train_loss << ',' << e.val_psnr << ',' << e.skipped << ','
        << e.wall_s << '\n';
}

TrainResult train(const Checkpoint& start, const std::vector<Image>& dataset,
                  const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  require(!dataset.empty(), ErrorCode::kIo, "train: empty dataset");
  require(start.model.prior.family == PriorFamily::kLowRank || start.model.bank.c_in() ==
                                                                   dataset.front().channels(),
          ErrorCode::kDimension, "train: filter bank channels do not match the dataset");
  TrainResult result;
  Checkpoint ck = start;
  std::mt19937_64 rng;
  {
    std::istringstream is(ck.rng_state);
    is >> rng;
    require(!is.fail(), ErrorCode::kFormat, "train: corrupt RNG state in checkpoint");
  }
  Trainables t = cfg.trainables;
  t.p = t.p && ck.model.learn_p;

  std::vector<DegradationSample> validation;
  for (std::size_t i = 0; i < cfg.validation_samples; ++i)
    validation.push_back(make_sample(dataset[i % dataset.size()], cfg,
                                     mix_seed(cfg.seed, 0x5641ULL + i)));

  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);
  std::vector<EpochLog> log;
  if (!options.out_dir.empty() && ck.epoch > 0) {
    // Keep the rows of the epochs that are already complete.
    std::ifstream f(options.out_dir / "train_log.csv");
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
      std::istringstream row(line);
      EpochLog e;
      char comma;
      row >> e.epoch >> comma >> e.train_loss >> comma >> e.val_psnr >> comma >> e.skipped >>
          comma >> e.wall_s;
      if (row && e.epoch <= ck.epoch) log.push_back(e);
    }
  }

  for (std::size_t epoch = ck.epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch));
    double loss_sum = 0.0;
    std::size_t used = 0, skipped = 0;
    for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
      if (options.stop && options.stop->load())
        fail(ErrorCode::kInterrupted, "train: interrupted during epoch " + std::to_string(epoch + 1));
      std::vector<DegradationSample> batch;
      for (std::size_t i = 0; i < cfg.batch; ++i) {
        const std::size_t idx = static_cast<std::size_t>(rng() % dataset.size());
        const std::uint64_t seed = rng();
        batch.push_back(make_sample(dataset[idx], cfg, seed));
      }
      std::vector<SampleOutcome> outcomes(batch.size());
      parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
        outcomes[i] = evaluate_sample(ck.model, batch[i], cfg, true);
      });
      Vec grad;
      std::size_t ok = 0;
      for (const auto& o : outcomes) {
        if (o.skipped) {
          ++skipped;
          continue;
        }
        Model shadow;
        shadow.bank = FilterBank(ck.model.bank.filters(), ck.model.bank.c_in(), ck.model.bank.kh(),
                                 ck.model.bank.kw(), o.grad.d_filters.empty()
                                                         ? Vec(ck.model.bank.coeffs().size(), 0.0)
                                                         : o.grad.d_filters);
        shadow.prior.weights = o.grad.d_weights;
        shadow.p_raw = o.grad.d_p;
        const Vec g = pack_parameters(shadow, t);
        if (grad.empty()) grad.assign(g.size(), 0.0);
        axpy(1.0, g, grad);
        loss_sum += o.loss;
        ++ok;
      }
      used += ok;
      if (ok == 0) continue;
      for (auto& g : grad) g /= static_cast<double>(ok);
      Vec params = pack_parameters(ck.model, t);
      adam_amsgrad_step(params, grad, ck.optimizer, lr);
      unpack_parameters(params, ck.model, t);
      project_weights(ck.model.prior);
    }
    const std::size_t total = cfg.batch * cfg.batches_per_epoch;
    if (static_cast<double>(skipped) > cfg.max_skip_fraction * static_cast<double>(total))
      fail(ErrorCode::kConvergence, "train: epoch " + std::to_string(epoch + 1) + " skipped " +
                                        std::to_string(skipped) + " of " + std::to_string(total) +
                                        " samples");

    std::vector<SampleOutcome> val(validation.size());
    parallel_for(validation.size(), cfg.threads, [&](std::size_t i) {
      val[i] = evaluate_sample(ck.model, validation[i], cfg, false);
    });
    double val_sum = 0.0;
    std::size_t val_used = 0;
    for (const auto& v : val)
      if (!v.skipped) {
        val_sum += v.psnr;
        ++val_used;
      }

    EpochLog e;
    e.epoch = epoch + 1;
    e.train_loss = used ? loss_sum / static_cast<double>(used) : 0.0;
    e.val_psnr = val_used ? val_sum / static_cast<double>(val_used) : 0.0;
    e.skipped = skipped;
    e.wall_s = options.record_timing
                   ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                   : 0.0;
    log.push_back(e);
    result.log.push_back(e);

    ck.epoch = epoch + 1;
    ck.rng_state = serialise_rng(rng);
    if (!options.out_dir.empty()) {
      std::ostringstream name;
      name << "checkpoint_" << std::setw(3) << std::setfill('0') << ck.epoch << ".bin";
      save_checkpoint(ck, options.out_dir / name.str());
      save_checkpoint(ck, options.out_dir / "latest.bin");
      std::ofstream f(options.out_dir / "train_log.csv");
      write_training_log(log, f);
    }
    if (options.on_epoch) options.on_epoch(e);
    if (options.stop_after_epoch && ck.epoch >= options.stop_after_epoch) break;
  }
  result.final = std::move(ck);
  return result;
}

}  // namespace lirls
