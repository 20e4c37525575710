#include "lirls/app.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "lirls/error.hpp"
#include "lirls/synthetic.hpp"

namespace lirls {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string yes_no(bool b) { return b ? "true" : "false"; }

void emit(const LogFn& log, const std::string& line) {
  if (log) log(line);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path);
  require(static_cast<bool>(f), ErrorCode::kIo, "cannot write " + path.string());
  f << text;
  require(static_cast<bool>(f), ErrorCode::kIo, "write failed: " + path.string());
}

struct Observation {
  OperatorPtr op;
  Vec y;
  double sigma = 0.0;
};

Kernel checked_kernel(const RunConfig& cfg) {
  require(!cfg.str("io.kernel").empty(), ErrorCode::kConfig, "io.kernel is required for this task");
  Kernel k = load_kernel(cfg.str("io.kernel"));
  require(k.height % 2 == 1 && k.width % 2 == 1, ErrorCode::kDimension,
          "kernel must have odd size, got " + std::to_string(k.height) + "x" +
              std::to_string(k.width));
  return k;
}

OperatorPtr operator_for_observation(Task task, const RunConfig& cfg, const Image& y) {
  switch (task) {
    case Task::kDeblur: {
      const Kernel k = checked_kernel(cfg);
      return std::make_shared<BlurOperator>(k, BlurOperator::input_for(k, y.dims()));
    }
    case Task::kSr: {
      const Kernel k = checked_kernel(cfg);
      const std::size_t s = cfg.count("degrade.scale");
      require(s >= 1, ErrorCode::kConfig, "degrade.scale must be >= 1");
      return std::make_shared<SrOperator>(k, s, SrOperator::input_for(k, s, y.dims()));
    }
    case Task::kDemosaick:
      require(y.channels() == 1, ErrorCode::kDimension,
              "demosaick expects a single-channel mosaic, got " + to_string(y.dims()));
      return std::make_shared<CfaOperator>(cfg.str("degrade.cfa"), y.height(), y.width());
  }
  fail(ErrorCode::kConfig, "unsupported task");
}

double required_sigma(const RunConfig& cfg) {
  require(!cfg.str("degrade.sigma").empty(), ErrorCode::kConfig,
          "degrade.sigma is required (no blind noise estimation)");
  const double s = cfg.real("degrade.sigma");
  require(s > 0.0, ErrorCode::kConfig, "degrade.sigma must be > 0");
  return s;
}

Observation observation_from_files(Task task, const RunConfig& cfg) {
  require(!cfg.str("io.input").empty(), ErrorCode::kConfig, "io.input is required");
  const Image y = load_image(cfg.str("io.input"));
  Observation o;
  o.op = operator_for_observation(task, cfg, y);
  o.y = y.data();
  o.sigma = required_sigma(cfg);
  return o;
}

Problem make_problem(const Observation& o, const Model& model, const RunConfig& cfg) {
  Problem p;
  p.forward = o.op;
  p.y = o.y;
  p.sigma = o.sigma;
  p.bank = std::make_shared<FilterBank>(model.bank);
  p.prior = model.prior;
  p.prior.p = model.p();
  p.delta = cfg.real("solver.delta");
  p.validate();
  return p;
}

std::filesystem::path sibling(const std::filesystem::path& out, const std::string& suffix) {
  auto p = out;
  p.replace_extension(suffix);
  return p;
}

CommandOutcome reconstruct(Task task, const RunConfig& cfg, const LogFn& log) {
  require(!cfg.str("io.output").empty(), ErrorCode::kConfig, "io.output is required");
  const std::filesystem::path out = cfg.str("io.output");
  const Observation obs = observation_from_files(task, cfg);
  const Dims xd = obs.op->input_dims();
  const Model model = model_from_config(cfg, xd.channels);
  const Problem problem = make_problem(obs, model, cfg);
  const IrlsLimits limits = limits_from_config(cfg);

  const Image x0 = initial_estimate(problem);
  emit(log, "solving " + to_string(task) + " for " + to_string(xd) + " (" + obs.op->name() + ")");
  const IrlsState st = irls_solve(problem, x0.data(), limits);
  const Image x(xd, st.x);
  save_image(x, out);
  const std::filesystem::path trace =
      cfg.str("io.trace").empty() ? sibling(out, ".trace.csv") : std::filesystem::path(cfg.str("io.trace"));
  save_trace_csv(st, trace);
  write_text(sibling(out, ".config.txt"), cfg.resolved());

  CommandOutcome r;
  r.add("task", to_string(task));
  r.add("operator", obs.op->name());
  r.add("unknown_dims", to_string(xd));
  r.add("sigma", num(obs.sigma));
  r.add("steps", std::to_string(st.k));
  r.add("converged", yes_no(st.converged));
  r.add("final_residual", num(st.residual_trace.back()));
  r.add("objective", num(st.objective_trace.back()));
  r.add("descent_violations", std::to_string(st.descent_violations));
  r.add("output", out.string());
  r.add("trace", trace.string());

  if (!cfg.str("io.gt").empty()) {
    const Image gt = load_image(cfg.str("io.gt"));
    require(gt.dims() == xd, ErrorCode::kDimension,
            "ground truth " + to_string(gt.dims()) + " does not match the unknown " + to_string(xd));
    const double peak = cfg.real("io.peak");
    const MetricReport before = compare(x0, gt, peak);
    const MetricReport after = compare(x, gt, peak);
    nlohmann::json j;
    auto psnr_json = [](const Psnr& p) { return p.infinite ? nlohmann::json("inf") : nlohmann::json(p.db); };
    j["peak"] = peak;
    j["init"] = {{"psnr", psnr_json(before.psnr)}, {"ssim", before.ssim}};
    j["output"] = {{"psnr", psnr_json(after.psnr)}, {"ssim", after.ssim}};
    const auto metrics = sibling(out, ".metrics.json");
    write_text(metrics, j.dump(2) + "\n");
    auto show = [](const Psnr& p) { return p.infinite ? std::string("inf") : num(p.db); };
    r.add("psnr_init", show(before.psnr));
    r.add("psnr", show(after.psnr));
    r.add("ssim", num(after.ssim));
    r.add("metrics", metrics.string());
  }
  r.exit_code = st.converged ? 0 : 2;
  return r;
}

std::vector<Image> dataset_from_config(const RunConfig& cfg) {
  const std::string src = cfg.str("train.dataset");
  if (src != "synthetic") return load_dataset(src);
  const std::size_t n = cfg.count("train.synthetic_count");
  const std::size_t side = cfg.count("train.synthetic_size");
  require(n >= 1 && side >= 8, ErrorCode::kConfig, "synthetic dataset needs count >= 1, size >= 8");
  const std::uint64_t base = static_cast<std::uint64_t>(cfg.integer("train.seed")) * 1000 + 100;
  std::vector<Image> images;
  for (std::size_t i = 0; i < n; ++i) images.push_back(synthetic_image({3, side, side}, base + i));
  return images;
}

CommandOutcome train_command(const RunConfig& cfg, const LogFn& log, const std::atomic<bool>* stop) {
  const TrainConfig tc = train_config_from(cfg);
  require(!cfg.str("train.out_dir").empty(), ErrorCode::kConfig, "train.out_dir is required");
  const std::filesystem::path out = cfg.str("train.out_dir");
  const std::vector<Image> data = dataset_from_config(cfg);

  Checkpoint start;
  if (cfg.flag("train.resume")) {
    start = load_checkpoint(out / "latest.bin");
    require(start.seed == tc.seed, ErrorCode::kConfig,
            "train.resume: checkpoint seed " + std::to_string(start.seed) +
                " differs from train.seed " + std::to_string(tc.seed));
    emit(log, "resuming after epoch " + std::to_string(start.epoch));
  } else {
    Model model = model_from_config(cfg, data.front().channels());
    if (tc.trainables.weights) model.prior.provider = WeightProvider::kGlobalLearned;
    if (tc.trainables.p) {
      model.learn_p = true;
      model.p_raw = raw_from_p(model.prior.p);
    }
    start = initial_checkpoint(model, tc);
  }
  std::filesystem::create_directories(out);
  write_text(out / "config.txt", cfg.resolved());

  TrainOptions opts;
  opts.out_dir = out;
  opts.stop_after_epoch = cfg.count("train.stop_after_epoch");
  opts.stop = stop;
  opts.on_epoch = [&](const EpochLog& e) {
    emit(log, "epoch " + std::to_string(e.epoch) + " train_loss " + num(e.train_loss) +
                  " val_psnr " + num(e.val_psnr) + " skipped " + std::to_string(e.skipped));
  };
  const TrainResult res = train(start, data, tc, opts);

  std::vector<double> val_loss;
  std::size_t skipped = 0;
  for (const auto& e : res.log) {
    val_loss.push_back(-e.val_psnr);
    skipped += e.skipped;
  }
  CommandOutcome r;
  r.add("epochs_completed", std::to_string(res.final.epoch));
  r.add("final_val_psnr", res.log.empty() ? "nan" : num(res.log.back().val_psnr));
  r.add("skipped_samples", std::to_string(skipped));
  r.add("val_ma5_non_increasing", yes_no(moving_average_non_increasing(val_loss, 5)));
  r.add("checkpoint", (out / "latest.bin").string());
  r.add("log", (out / "train_log.csv").string());
  return r;
}

Observation synthetic_observation(Task task, const RunConfig& cfg, Image& gt) {
  const auto seed = static_cast<std::uint64_t>(cfg.integer("diagnose.seed"));
  const std::size_t side = cfg.count("diagnose.size");
  gt = synthetic_image({3, side, side}, seed);
  const Kernel k = synth_kernel(parse_kernel_kind(cfg.str("diagnose.kernel")),
                                cfg.count("diagnose.kernel_size"), seed + 1);
  const std::string mutation = cfg.str("diagnose.mutation");
  require(mutation == "none" || mutation == "adjoint", ErrorCode::kConfig,
          "diagnose.mutation must be none or adjoint");
  Observation o;
  if (mutation == "adjoint") {
    require(task == Task::kDeblur, ErrorCode::kConfig, "the adjoint mutation applies to deblur only");
    o.op = std::make_shared<MutatedBlurOperator>(k, gt.dims());
  } else if (task == Task::kDeblur) {
    o.op = std::make_shared<BlurOperator>(k, gt.dims());
  } else if (task == Task::kSr) {
    o.op = std::make_shared<SrOperator>(k, cfg.count("degrade.scale"), gt.dims());
  } else {
    o.op = std::make_shared<CfaOperator>(cfg.str("degrade.cfa"), side, side);
  }
  o.sigma = cfg.str("degrade.sigma").empty() ? 0.01 : cfg.real("degrade.sigma");
  require(o.sigma > 0.0, ErrorCode::kConfig, "degrade.sigma must be > 0");
  o.y = o.op->apply(gt.span());
  std::mt19937_64 rng(seed + 2);
  std::normal_distribution<double> noise(0.0, o.sigma);
  for (auto& v : o.y) v += noise(rng);
  return o;
}

CommandOutcome diagnose(const RunConfig& cfg, const LogFn& log) {
  const Task task = parse_task(cfg.str("diagnose.task"));
  Image gt;
  const bool synthetic = cfg.str("io.input").empty();
  const Observation obs =
      synthetic ? synthetic_observation(task, cfg, gt) : observation_from_files(task, cfg);
  const Dims xd = obs.op->input_dims();
  const Model model = model_from_config(cfg, xd.channels);
  const Problem problem = make_problem(obs, model, cfg);
  const double adj_tol = cfg.real("diagnose.adjoint_tol");
  const auto seed = static_cast<std::uint64_t>(cfg.integer("diagnose.seed"));

  CommandOutcome r;
  r.add("fixture", synthetic ? "synthetic seed " + std::to_string(seed) : cfg.str("io.input"));
  r.add("operator", obs.op->name());
  r.add("unknown_dims", to_string(xd));
  const double defect_a = adjoint_check(*obs.op, 20, seed);
  const AnalysisOperator g_op(problem.bank, problem.mode(), xd);
  const double defect_g = adjoint_check(g_op, 20, seed + 1);
  r.add("adjoint_defect_A", num(defect_a));
  r.add("adjoint_defect_G", num(defect_g));
  bool ok = defect_a <= adj_tol && defect_g <= adj_tol;

  IrlsLimits limits = limits_from_config(cfg);
  limits.max_steps = cfg.count("diagnose.max_steps");
  limits.inner.max_iterations = cfg.count("diagnose.inner_max");
  limits.throw_on_violation = false;
  emit(log, "solving the diagnostic problem (" + std::to_string(limits.max_steps) + " step cap)");
  IrlsState st;
  try {
    st = irls_solve(problem, initial_estimate(problem).data(), limits);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDivergence && e.code() != ErrorCode::kConvergence &&
        e.code() != ErrorCode::kMajorizerViolation)
      throw;
    r.add("solve_error", e.what());
    r.add("pass", "false");
    r.exit_code = 2;
    return r;
  }
  r.add("steps", std::to_string(st.k));
  r.add("converged", yes_no(st.converged));
  r.add("stationarity", num(st.residual_trace.back()));
  r.add("descent_violations", std::to_string(st.descent_violations));
  r.add("max_descent_increase", num(st.max_descent_increase));
  ok = ok && st.converged && st.descent_violations == 0;

  {
    // Central difference of J along one seeded unit direction.
    std::mt19937_64 rng(seed + 3);
    std::normal_distribution<double> normal;
    Vec d(st.x.size());
    for (auto& e : d) e = normal(rng);
    const double dn = norm2(d);
    for (auto& e : d) e /= dn;
    const double h = 1e-5;
    Vec xp = st.x, xm = st.x;
    axpy(h, d, xp);
    axpy(-h, d, xm);
    const double fd = (objective(problem, xp) - objective(problem, xm)) / (2 * h);
    const Vec g0 = objective_gradient(problem, st.x);
    const double an = dot(g0, d);
    const double scale = std::max(norm2(g0), std::abs(an));
    r.add("gradient_fd_defect", num(std::abs(fd - an) / std::max(scale, 1e-300)));
  }

  if (st.converged) {
    RateBoundOptions ro;
    ro.lanczos_iterations = cfg.count("rate.lanczos_iterations");
    ro.seed = static_cast<std::uint64_t>(cfg.integer("rate.seed"));
    ro.extension_steps = cfg.count("rate.extension_steps");
    ro.window = cfg.count("rate.window");
    ro.finite_difference_hvp = cfg.flag("rate.fd_hvp");
    emit(log, "estimating the rate bound");
    const RateBoundReport rb = rate_bound(problem, st, ro);
    const bool holds = rb.observed_ratio <= rb.nu_ub + 0.05;
    r.add("nu_ub", num(rb.nu_ub));
    r.add("nu_local", num(rb.nu_local));
    r.add("lambda_min_H", num(rb.lambda_min_H));
    r.add("lambda_max_H", num(rb.lambda_max_H));
    r.add("j_star", num(rb.j_star));
    r.add("observed_ratio", num(rb.observed_ratio));
    r.add("ratio_samples", std::to_string(rb.ratio_samples));
    r.add("rate_bound_holds", yes_no(holds));
    ok = ok && holds;
  }
  if (synthetic) {
    const Image x(xd, st.x);
    r.add("psnr_vs_gt", num(psnr(x, gt, cfg.real("io.peak")).db));
  }
  r.add("pass", yes_no(ok));
  r.exit_code = ok ? 0 : 2;
  return r;
}

}  // namespace

FilterBank bank_from_config(const RunConfig& cfg, PriorFamily family, std::size_t channels) {
  const std::string name = cfg.str("prior.bank");
  const std::size_t size = cfg.count("prior.bank_size");
  const bool lowrank = family == PriorFamily::kLowRank;
  const std::size_t c_in = lowrank ? 1 : channels;
  if (name == "auto") {
    return FilterBank::dct(c_in, size, !lowrank && channels > 1);
  }
  if (name == "dct") return FilterBank::dct(c_in, size, false);
  if (name == "dct-per-channel") {
    require(!lowrank, ErrorCode::kConfig, "dct-per-channel is a sparse-mode bank");
    return FilterBank::dct(channels, size, true);
  }
  if (name == "random")
    return FilterBank::zero_mean_random(cfg.count("prior.bank_filters"), c_in, size,
                                        static_cast<std::uint64_t>(cfg.integer("prior.bank_seed")));
  if (name == "gradient") return FilterBank::gradient(c_in);
  if (name == "identity") return FilterBank::identity(c_in);
  return load_filter_bank(name);
}

Model model_from_config(const RunConfig& cfg, std::size_t channels) {
  if (!cfg.str("prior.checkpoint").empty()) return load_checkpoint(cfg.str("prior.checkpoint")).model;
  Model m;
  const PriorFamily family = parse_family(cfg.str("prior.family"));
  m.bank = bank_from_config(cfg, family, channels);
  const std::size_t len = PriorSpec::weight_count(family, m.bank.filters(), channels);
  m.prior = PriorSpec::fixed(family, cfg.real("prior.p"), cfg.real("prior.gamma"), len,
                             cfg.real("prior.weight"));
  m.prior.provider = parse_provider(cfg.str("prior.provider"));
  const Vec w = cfg.list("prior.weights");
  if (!w.empty()) {
    require(w.size() == len, ErrorCode::kConfig,
            "prior.weights has " + std::to_string(w.size()) + " entries, expected " +
                std::to_string(len));
    m.prior.weights = w;
  }
  const std::string map = cfg.str("prior.weight_map");
  if (m.prior.provider == WeightProvider::kFileLoaded) {
    require(!map.empty(), ErrorCode::kConfig, "prior.provider=file needs prior.weight_map");
    const Image wm = load_image(map);
    m.prior.weight_map = Features{wm.channels(), wm.height(), wm.width(), wm.data()};
  } else {
    require(map.empty(), ErrorCode::kConfig, "prior.weight_map is only used with prior.provider=file");
  }
  return m;
}

IrlsLimits limits_from_config(const RunConfig& cfg) {
  IrlsLimits l = IrlsLimits::inference(cfg.count("solver.max_steps"));
  l.tolerance = cfg.real("solver.tol");
  l.consecutive = cfg.count("solver.consecutive");
  l.inner.max_iterations = cfg.count("solver.inner_max");
  l.inner.relative_tolerance = cfg.real("solver.inner_tol");
  l.precondition = cfg.flag("solver.precondition");
  l.throw_on_violation = cfg.flag("solver.strict");
  require(l.max_steps >= 1 && l.consecutive >= 1 && l.inner.max_iterations >= 1, ErrorCode::kConfig,
          "solver caps must be >= 1");
  return l;
}

TrainConfig train_config_from(const RunConfig& cfg) {
  TrainConfig t;
  t.task = parse_task(cfg.str("train.task"));
  t.crop = cfg.count("train.crop");
  t.batch = cfg.count("train.batch");
  t.epochs = cfg.count("train.epochs");
  t.batches_per_epoch = cfg.count("train.batches_per_epoch");
  t.validation_samples = cfg.count("train.validation");
  t.lr = cfg.real("train.lr");
  t.lr_decay = cfg.real("train.lr_decay");
  t.noise_min = cfg.real("train.noise_min");
  t.noise_max = cfg.real("train.noise_max");
  t.kernel_kind = parse_kernel_kind(cfg.str("train.kernel"));
  t.kernel_size = cfg.count("train.kernel_size");
  t.sr_scale = cfg.count("train.sr_scale");
  t.cfa_pattern = cfg.str("degrade.cfa");
  t.seed = static_cast<std::uint64_t>(cfg.integer("train.seed"));
  t.trainables = {};
  std::stringstream ss(cfg.str("train.learn"));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "filters") t.trainables.filters = true;
    else if (item == "weights") t.trainables.weights = true;
    else if (item == "p") t.trainables.p = true;
    else fail(ErrorCode::kConfig, "train.learn: unknown parameter group '" + item + "'");
  }
  t.forward = IrlsLimits::training();
  t.forward.max_steps = cfg.count("train.max_steps");
  t.forward.inner.max_iterations = cfg.count("train.inner_max");
  t.backward = backward_solve_config();
  t.backward.max_iterations = cfg.count("train.backward_max");
  t.backward.relative_tolerance = cfg.real("train.backward_tol");
  t.max_skip_fraction = cfg.real("train.max_skip");
  t.peak = cfg.real("io.peak");
  t.threads = cfg.count("run.threads");
  if (cfg.integer("train.loss_margin") >= 0) t.loss_margin = cfg.count("train.loss_margin");
  t.validate();
  return t;
}

CommandOutcome run_command(const std::string& command, const RunConfig& cfg, const LogFn& log,
                           const std::atomic<bool>* stop) {
  if (command == "deblur") return reconstruct(Task::kDeblur, cfg, log);
  if (command == "sr") return reconstruct(Task::kSr, cfg, log);
  if (command == "demosaick") return reconstruct(Task::kDemosaick, cfg, log);
  if (command == "train") return train_command(cfg, log, stop);
  if (command == "diagnose") return diagnose(cfg, log);
  fail(ErrorCode::kConfig, "unknown command '" + command + "' (deblur|sr|demosaick|train|diagnose)");
}

}  // namespace lirls
