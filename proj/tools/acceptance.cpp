// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails.
//
//   lirls_acceptance <data-dir> [criterion ...]
//
// With no criterion numbers all nine run in order.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "json.hpp"
#include "lirls/app.hpp"
#include "lirls/error.hpp"
#include "lirls/implicit_grad.hpp"
#include "lirls/irls.hpp"
#include "lirls/synthetic.hpp"
#include "lirls/training.hpp"

using namespace lirls;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// ---- pinned tolerances and budgets -----------------------------------------
constexpr double kAdjointTol = 1e-12;
constexpr std::size_t kAdjointTrials = 100;
constexpr double kAdjointBudgetS = 10.0;

constexpr double kGapTol = 1e-12;
constexpr std::size_t kGapDraws = 1000;
constexpr double kGapBudgetS = 30.0;

constexpr std::size_t kDeskProblems = 20;
constexpr double kResidualTol = 1e-4;
constexpr std::size_t kConsecutive = 3;
constexpr std::size_t kDeskStepCap = 400;
constexpr double kDeskBudgetS = 600.0;

constexpr std::size_t kRateProblems = 10;
constexpr double kRateSlack = 0.05;
constexpr double kLanczosTol = 1e-3;
constexpr double kRateBudgetS = 600.0;

constexpr double kObjGradTol = 1e-6;
constexpr std::size_t kObjGradCoords = 200;
constexpr std::size_t kObjGradProblems = 5;
constexpr double kJacobianTol = 1e-5;
constexpr double kVjpTol = 1e-5;
constexpr double kEndToEndTol = 1e-3;
constexpr double kGradBudgetS = 900.0;

constexpr double kDenseSolveTol = 1e-8;
constexpr int kDenseDim = 200;
constexpr int kLanczosDim = 300;
constexpr double kLanczosEigTol = 1e-3;

constexpr double kDeblurMarginDb = 0.5;
constexpr double kSrMarginDb = 0.3;
constexpr double kDemosaickTol = 1e-6;
constexpr double kBaselineRegressionDb = 1e-6;

constexpr std::size_t kTrainEpochs = 30;
constexpr std::size_t kTrainResumeFrom = 20;
constexpr std::size_t kTrainWindow = 5;
constexpr double kTrainBudgetS = 3600.0;

constexpr double kInitAgreementTol = 1e-6;

// ---- reporting ----------------------------------------------------------------

struct Line {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string g(double v) { return fmt("%.3g", v); }

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Vec gaussian(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vec v(n);
  for (double& e : v) e = d(rng);
  return v;
}

// ---- desk problems ------------------------------------------------------------

struct DeskSpec {
  PriorFamily family = PriorFamily::kSparse;
  double p = 1.0;
  std::uint64_t seed = 1;
  std::size_t size = 48;
  std::size_t channels = 3;
  double sigma = 0.01;
};

Problem desk_problem(const DeskSpec& s, Vec* gt = nullptr) {
  const Dims d{s.channels, s.size, s.size};
  const Image x = synthetic_image(d, 1000 + s.seed);
  const KernelKind kind = s.seed % 2 ? KernelKind::kMotion : KernelKind::kGaussian;
  const Kernel k = synth_kernel(kind, 5, 2000 + s.seed);
  auto op = std::make_shared<BlurOperator>(k, d);
  Problem pr;
  pr.forward = op;
  pr.sigma = s.sigma;
  std::mt19937_64 rng(3000 + s.seed);
  pr.y = op->apply(x.data());
  const Vec n = gaussian(pr.y.size(), rng, s.sigma);
  for (std::size_t i = 0; i < n.size(); ++i) pr.y[i] += n[i];
  const bool lowrank = s.family == PriorFamily::kLowRank;
  pr.bank = std::make_shared<FilterBank>(
      FilterBank::dct(lowrank ? 1 : s.channels, 3, !lowrank && s.channels > 1));
  const std::size_t gd = pr.bank->group_dim(feature_mode(s.family), s.channels);
  pr.prior = PriorSpec::fixed(s.family, s.p, 1e-4,
                              PriorSpec::weight_count(s.family, gd, s.channels));
  if (gt) *gt = x.data();
  return pr;
}

IrlsLimits desk_limits() {
  IrlsLimits lim = IrlsLimits::training();
  lim.max_steps = kDeskStepCap;
  lim.tolerance = kResidualTol;
  lim.consecutive = kConsecutive;
  lim.throw_on_violation = false;
  return lim;
}

// ---- criteria -------------------------------------------------------------------

Line criterion_adjoint() {
  const auto t0 = Clock::now();
  const Kernel motion = synth_kernel(KernelKind::kMotion, 9, 11);
  const BlurOperator blur(motion, {3, 48, 48});
  const SrOperator sr(motion, 2, {3, 49, 50});
  const CfaOperator cfa("RGGB", 48, 48);
  const AnalysisOperator g_sparse(
      std::make_shared<FilterBank>(FilterBank::zero_mean_random(8, 3, 3, 5)), FeatureMode::kSparse,
      {3, 48, 48});
  const AnalysisOperator g_lowrank(std::make_shared<FilterBank>(FilterBank::dct(1, 3, false)),
                                   FeatureMode::kLowRank, {3, 48, 48});
  const double d_blur = adjoint_check(blur, kAdjointTrials, 1);
  const double d_sr = adjoint_check(sr, kAdjointTrials, 2);
  const double d_cfa = adjoint_check(cfa, kAdjointTrials, 3);
  const double d_g = std::max(adjoint_check(g_sparse, kAdjointTrials, 4),
                              adjoint_check(g_lowrank, kAdjointTrials, 5));
  const double t = seconds_since(t0);
  const double worst = std::max({d_blur, d_sr, d_cfa, d_g});
  return {worst <= kAdjointTol && t < kAdjointBudgetS,
          "defects blur " + g(d_blur) + " sr " + g(d_sr) + " cfa " + g(d_cfa) + " bank " + g(d_g) +
              " (tol " + g(kAdjointTol) + ", " + std::to_string(kAdjointTrials) + " trials), " +
              fmt("%.2f s", t)};
}

Line criterion_majorizer() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> up(0.1, 1.0), ulg(-8.0, 0.0), ulscale(-2.0, 1.5),
      uw(0.0, 4.0);
  double min_sparse = INFINITY, min_lowrank = INFINITY, eq = 0.0;
  for (std::size_t t = 0; t < kGapDraws; ++t) {
    const double p = up(rng), gamma = std::pow(10.0, ulg(rng)), scale = std::pow(10.0, ulscale(rng));
    const std::size_t d = 1 + t % 24;
    const Vec x = gaussian(d, rng, scale), y = gaussian(d, rng, scale);
    Vec w(d);
    for (double& e : w) e = uw(rng);
    min_sparse = std::min(min_sparse, majorizer_gap_sparse(x, y, w, p, gamma));
    eq = std::max(eq, std::abs(majorizer_gap_sparse(y, y, w, p, gamma)));

    const std::size_t c = 1 + t % 3, q = c + t % 6;
    Matrix xm(c, q), ym(c, q);
    xm.data = gaussian(c * q, rng, scale);
    ym.data = gaussian(c * q, rng, scale);
    Vec wl(c);
    for (double& e : wl) e = uw(rng);
    std::sort(wl.begin(), wl.end());
    min_lowrank = std::min(min_lowrank, majorizer_gap_lowrank(xm, ym, wl, p, gamma));
    eq = std::max(eq, std::abs(majorizer_gap_lowrank(ym, ym, wl, p, gamma)));
  }
  const double t = seconds_since(t0);
  return {min_sparse >= -kGapTol && min_lowrank >= -kGapTol && eq <= kGapTol && t < kGapBudgetS,
          "min gap sparse " + g(min_sparse) + " lowrank " + g(min_lowrank) + ", max |gap| at equality " +
              g(eq) + " over " + std::to_string(kGapDraws) + " draws each, " + fmt("%.2f s", t)};
}

Line criterion_desk() {
  const auto t0 = Clock::now();
  std::size_t ok = 0, violations = 0, max_steps = 0;
  double worst_res = 0.0;
  for (std::size_t i = 0; i < kDeskProblems; ++i) {
    DeskSpec s;
    s.seed = i;
    s.family = i % 2 ? PriorFamily::kLowRank : PriorFamily::kSparse;
    s.p = (i / 2) % 2 ? 0.7 : 1.0;
    s.sigma = i % 3 ? 0.01 : 0.02;
    const Problem pr = desk_problem(s);
    const IrlsState st = irls_solve(pr, initial_estimate(pr).data(), desk_limits());
    violations += st.descent_violations;
    max_steps = std::max(max_steps, st.k);
    const std::size_t n = st.residual_trace.size();
    bool tail = st.converged && n >= kConsecutive;
    for (std::size_t k = n - std::min(n, kConsecutive); k < n; ++k) {
      tail = tail && st.residual_trace[k] < kResidualTol;
      worst_res = std::max(worst_res, st.residual_trace[k]);
    }
    if (tail && st.descent_violations == 0) ++ok;
  }
  const double t = seconds_since(t0);
  return {ok == kDeskProblems && violations == 0 && t < kDeskBudgetS,
          std::to_string(ok) + "/" + std::to_string(kDeskProblems) +
              " converged (l1, lp, S1, Sp), descent violations " + std::to_string(violations) +
              ", most steps " + std::to_string(max_steps) + ", worst final residual " + g(worst_res) +
              ", " + fmt("%.1f s", t)};
}

Line criterion_rate() {
  const auto t0 = Clock::now();
  std::size_t ok = 0;
  double worst_margin = -INFINITY, worst_lanczos = 0.0;
  for (std::size_t i = 0; i < kRateProblems; ++i) {
    DeskSpec s;
    s.seed = 100 + i;
    s.p = i % 2 ? 0.8 : 1.0;
    const Problem pr = desk_problem(s);
    const IrlsState st = irls_solve(pr, initial_estimate(pr).data(), desk_limits());
    if (!st.converged) continue;
    RateBoundOptions opt;
    opt.lanczos_iterations = 600;
    const RateBoundReport r = rate_bound(pr, st, opt);
    const double rel_res = r.lanczos_residual / std::max(1.0, std::abs(r.lambda_min_H));
    worst_lanczos = std::max(worst_lanczos, rel_res);
    worst_margin = std::max(worst_margin, r.observed_ratio - r.nu_ub);
    if (r.observed_ratio <= r.nu_ub + kRateSlack && rel_res <= kLanczosTol) ++ok;
  }
  const double t = seconds_since(t0);
  return {ok == kRateProblems && t < kRateBudgetS,
          std::to_string(ok) + "/" + std::to_string(kRateProblems) +
              " within bound, max(observed - nu_ub) " + g(worst_margin) + " (slack " + g(kRateSlack) +
              "), worst relative Lanczos residual " + g(worst_lanczos) + ", " + fmt("%.1f s", t)};
}

// Relative error of dL/dtheta from the implicit backward pass against
// re-solving under perturbed filters.
double end_to_end_error(std::size_t* taps) {
  DeskSpec e;
  e.seed = 400;
  e.size = 16;
  e.sigma = 0.02;
  e.channels = 1;
  Vec gt;
  Problem ep = desk_problem(e, &gt);
  ep.bank = std::make_shared<FilterBank>(FilterBank::zero_mean_random(2, 1, 3, 9));
  ep.prior = PriorSpec::fixed(PriorFamily::kSparse, 1.0, 1e-2, 2, 3.0);
  IrlsLimits tight = desk_limits();
  tight.tolerance = 1e-11;
  tight.max_steps = 5000;
  tight.inner = SolveConfig{800, 1e-12, {}};
  tight.strict = false;
  const Dims d = ep.x_dims();
  const std::size_t margin = (5 - 1) + (3 - 1);
  auto solve = [&](const Problem& q) { return irls_solve(q, initial_estimate(q).data(), tight).x; };
  const Vec xs = solve(ep);
  const LossValue lv = negative_psnr_loss(xs, gt, d, margin);
  const GradientBundle eg = implicit_loss_grad(ep, xs, lv.grad, Trainables{true, false, false},
                                               SolveConfig{5000, 1e-10, {}, 1e-12});
  Vec fd_e(ep.bank->coeffs().size());
  const double he = 1e-5;
  for (std::size_t i = 0; i < fd_e.size(); ++i) {
    Problem qp = ep, qm = ep;
    auto bp = std::make_shared<FilterBank>(*ep.bank), bm = std::make_shared<FilterBank>(*ep.bank);
    bp->coeffs()[i] += he;
    bm->coeffs()[i] -= he;
    qp.bank = bp;
    qm.bank = bm;
    fd_e[i] = (negative_psnr_loss(solve(qp), gt, d, margin).loss -
               negative_psnr_loss(solve(qm), gt, d, margin).loss) /
              (2 * he);
  }
  Vec de(fd_e.size());
  for (std::size_t i = 0; i < de.size(); ++i) de[i] = fd_e[i] - eg.d_filters[i];
  const double e2e_err = norm2(de) / norm2(fd_e);

  *taps = fd_e.size();
  return e2e_err;
}

Line criterion_gradients() {
  const auto t0 = Clock::now();
  // (a) objective gradient against fourth-order central differences.
  double worst_obj = 0.0;
  for (std::size_t i = 0; i < kObjGradProblems; ++i) {
    DeskSpec s;
    s.seed = 200 + i;
    s.size = 24;
    s.family = i % 2 ? PriorFamily::kLowRank : PriorFamily::kSparse;
    s.p = i < 2 ? 1.0 : 0.7;
    const Problem pr = desk_problem(s);
    const Vec x = initial_estimate(pr).data();
    const Vec grad = objective_gradient(pr, x);
    std::mt19937_64 rng(7 + i);
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    const double h = 1e-4;
    for (std::size_t t = 0; t < kObjGradCoords; ++t) {
      const std::size_t j = pick(rng);
      auto at = [&](double step) {
        Vec xx = x;
        xx[j] += step;
        return objective(pr, xx);
      };
      const double fd = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
      worst_obj = std::max(worst_obj, std::abs(fd - grad[j]) / std::max(1.0, std::abs(grad[j])));
    }
  }

  // (b) Jacobian of g and (c) vjp, on a converged 3-channel problem with a
  // learnable bank.
  DeskSpec s;
  s.seed = 300;
  s.size = 20;
  s.p = 0.8;
  Problem pr = desk_problem(s);
  pr.bank = std::make_shared<FilterBank>(FilterBank::zero_mean_random(4, 3, 3, 8));
  pr.prior = PriorSpec::fixed(PriorFamily::kSparse, 0.8, 1e-3, 4, 3.0);
  pr.prior.provider = WeightProvider::kGlobalLearned;
  pr.prior.weights = {2.0, 2.5, 3.0, 3.5};
  const IrlsState st = irls_solve(pr, initial_estimate(pr).data(), desk_limits());
  const FixedPointResidual res(pr, st.x);
  std::mt19937_64 rng(5);
  const Vec v = gaussian(st.x.size(), rng);
  Vec jv(v.size());
  res.jacobian_apply(v, jv);
  const double h = 1e-6;
  Vec xp = st.x, xm = st.x;
  axpy(h, v, xp);
  axpy(-h, v, xm);
  const Vec gp = fixed_point_map(pr, xp), gm = fixed_point_map(pr, xm);
  Vec diff(v.size());
  double fd_norm = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double fd = (gp[i] - gm[i]) / (2 * h);
    diff[i] = fd - jv[i];
    fd_norm += fd * fd;
  }
  const double jac_err = norm2(diff) / std::sqrt(fd_norm);

  const GradientBundle b = vjp_raw(res, v, Trainables{true, true, true});
  auto pairing = [&](const Problem& q) { return dot(v, fixed_point_map(q, st.x)); };
  Vec fd_theta, an_theta;
  for (std::size_t i = 0; i < pr.bank->coeffs().size(); ++i) {
    Problem qp = pr, qm = pr;
    auto bp = std::make_shared<FilterBank>(*pr.bank), bm = std::make_shared<FilterBank>(*pr.bank);
    bp->coeffs()[i] += h;
    bm->coeffs()[i] -= h;
    qp.bank = bp;
    qm.bank = bm;
    fd_theta.push_back((pairing(qp) - pairing(qm)) / (2 * h));
    an_theta.push_back(b.d_filters[i]);
  }
  for (std::size_t j = 0; j < pr.prior.weights.size(); ++j) {
    Problem qp = pr, qm = pr;
    qp.prior.weights[j] += h;
    qm.prior.weights[j] -= h;
    fd_theta.push_back((pairing(qp) - pairing(qm)) / (2 * h));
    an_theta.push_back(b.d_weights[j]);
  }
  {
    Problem qp = pr, qm = pr;
    qp.prior.p += h;
    qm.prior.p -= h;
    fd_theta.push_back((pairing(qp) - pairing(qm)) / (2 * h));
    an_theta.push_back(b.d_p);
  }
  Vec vd(fd_theta.size());
  for (std::size_t i = 0; i < vd.size(); ++i) vd[i] = fd_theta[i] - an_theta[i];
  const double vjp_err = norm2(vd) / norm2(fd_theta);

  std::size_t taps = 0;
  const double e2e_err = end_to_end_error(&taps);

  const double t = seconds_since(t0);
  return {worst_obj <= kObjGradTol && jac_err <= kJacobianTol && vjp_err <= kVjpTol &&
              e2e_err <= kEndToEndTol && t < kGradBudgetS,
          "grad J " + g(worst_obj) + " (" + std::to_string(kObjGradCoords) + " coords x " +
              std::to_string(kObjGradProblems) + "), dg/dx " + g(jac_err) + ", vjp " + g(vjp_err) +
              ", end-to-end dL/dtheta " + g(e2e_err) + " over " + std::to_string(taps) +
              " filter taps, " + fmt("%.1f s", t)};
}

Line criterion_dense() {
  std::mt19937_64 rng(17);
  const Vec ga = gaussian(kDenseDim * kDenseDim, rng);
  const Eigen::MatrixXd a = Eigen::Map<const Eigen::MatrixXd>(ga.data(), kDenseDim, kDenseDim);
  const Eigen::MatrixXd spd = a.transpose() * a / kDenseDim + 0.05 * Eigen::MatrixXd::Identity(kDenseDim, kDenseDim);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd spectrum(kDenseDim);
  for (int i = 0; i < kDenseDim; ++i) spectrum(i) = (i % 2 ? -1.0 : 1.0) * (0.2 + 0.03 * i);
  const Eigen::MatrixXd indefinite = q * spectrum.asDiagonal() * q.transpose();
  const Vec b = gaussian(kDenseDim, rng);
  const Eigen::Map<const Eigen::VectorXd> be(b.data(), kDenseDim);
  auto mv = [](const Eigen::MatrixXd& m) {
    return [&m](std::span<const double> x, std::span<double> out) {
      Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) =
          m * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    };
  };
  auto rel = [&](const Vec& x, const Eigen::VectorXd& ref) {
    return (Eigen::Map<const Eigen::VectorXd>(x.data(), kDenseDim) - ref).norm() / ref.norm();
  };
  const SolveConfig cfg{4000, 1e-14, {}};
  const Vec zero(kDenseDim, 0.0);
  const double cg_err = rel(cg_solve(mv(spd), b, zero, cfg).solution, spd.ldlt().solve(be));
  const double mr_spd = rel(minres_solve(mv(spd), b, zero, cfg).solution, spd.ldlt().solve(be));
  const double mr_ind =
      rel(minres_solve(mv(indefinite), b, zero, cfg).solution, indefinite.fullPivLu().solve(be));

  const Vec gl = gaussian(kLanczosDim * kLanczosDim, rng);
  const Eigen::MatrixXd l = Eigen::Map<const Eigen::MatrixXd>(gl.data(), kLanczosDim, kLanczosDim);
  const Eigen::MatrixXd sym = (l + l.transpose()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const LanczosResult lz = lanczos_extreme_eigs(mv(sym), kLanczosDim, kLanczosDim, 3);
  const double lz_err = std::max(std::abs(lz.lambda_min - es.eigenvalues()(0)),
                                 std::abs(lz.lambda_max - es.eigenvalues()(kLanczosDim - 1)));
  return {cg_err <= kDenseSolveTol && mr_spd <= kDenseSolveTol && mr_ind <= kDenseSolveTol &&
              lz_err <= kLanczosEigTol,
          "CG " + g(cg_err) + ", MINRES spd " + g(mr_spd) + " indefinite " + g(mr_ind) + " (n=" +
              std::to_string(kDenseDim) + "), Lanczos extremes " + g(lz_err) + " (n=" +
              std::to_string(kLanczosDim) + ")"};
}

// Runs a reconstruction command on fixture files and loads the written
// estimate.
Image reconstruct(const std::string& command, const fs::path& data, const fs::path& work,
                  const std::string& stem, bool with_kernel, int* exit_code) {
  RunConfig cfg;
  cfg.set("io.input", (data / (stem + "_y.pfm")).string());
  if (with_kernel) cfg.set("io.kernel", (data / (stem + "_kernel.txt")).string());
  cfg.set("io.output", (work / (stem + "_out.pfm")).string());
  cfg.set("degrade.sigma", "0.01");
  *exit_code = run_command(command, cfg).exit_code;
  return load_pfm(work / (stem + "_out.pfm"));
}

Line criterion_quality(const fs::path& data) {
  const auto t0 = Clock::now();
  const fs::path work = fs::temp_directory_path() / "lirls_acceptance_quality";
  fs::create_directories(work);
  nlohmann::json baselines;
  std::ifstream(data / "baselines.json") >> baselines;

  int e_deblur = 0, e_sr = 0, e_demo = 0;
  const Image deblur_gt = load_pfm(data / "deblur_gt.pfm");
  const double deblur_base = baselines["deblur"]["psnr"].get<double>();
  const double deblur_base_now = psnr(load_pfm(data / "deblur_wiener.pfm"), deblur_gt).db;
  const double deblur = psnr(reconstruct("deblur", data, work, "deblur", true, &e_deblur), deblur_gt).db;

  const Image sr_gt = load_pfm(data / "sr_gt.pfm");
  const double sr_base = baselines["sr"]["psnr"].get<double>();
  const double sr_base_now = psnr(load_pfm(data / "sr_bicubic.pfm"), sr_gt).db;
  const double sr = psnr(reconstruct("sr", data, work, "sr", true, &e_sr), sr_gt).db;

  const Image demo_gt = load_pfm(data / "demosaick_gt.pfm");
  const Image demo = reconstruct("demosaick", data, work, "demosaick", false, &e_demo);
  double demo_err = 0.0;
  for (std::size_t i = 0; i < demo.size(); ++i)
    demo_err = std::max(demo_err, std::abs(demo.data()[i] - demo_gt.data()[i]));
  fs::remove_all(work);

  const bool baselines_ok = std::abs(deblur_base - deblur_base_now) <= kBaselineRegressionDb &&
                            std::abs(sr_base - sr_base_now) <= kBaselineRegressionDb;
  const double t = seconds_since(t0);
  return {e_deblur == 0 && e_sr == 0 && e_demo == 0 && baselines_ok &&
              deblur - deblur_base >= kDeblurMarginDb && sr - sr_base >= kSrMarginDb &&
              demo_err <= kDemosaickTol,
          "deblur " + fmt("%.2f", deblur) + " dB vs Wiener " + fmt("%.2f", deblur_base) + " (+" +
              fmt("%.2f", deblur - deblur_base) + "), SR " + fmt("%.2f", sr) + " dB vs bicubic " +
              fmt("%.2f", sr_base) + " (+" + fmt("%.2f", sr - sr_base) + "), demosaick max error " +
              g(demo_err) + ", committed baselines " + (baselines_ok ? "reproduced" : "DIFFER") + ", " +
              fmt("%.1f s", t)};
}

std::string checkpoint_bytes(const Checkpoint& c) {
  std::ostringstream out;
  write_checkpoint(c, out);
  return out.str();
}

Line criterion_training() {
  const auto t0 = Clock::now();
  std::vector<Image> dataset;
  for (std::uint64_t i = 0; i < 16; ++i) dataset.push_back(synthetic_image({3, 64, 64}, 100 + i));
  Model m;
  m.bank = FilterBank::zero_mean_random(8, 3, 3, 11);
  m.prior = PriorSpec::fixed(PriorFamily::kSparse, 0.8, 1e-4, m.bank.filters(), 3.0);
  TrainConfig cfg;
  cfg.epochs = kTrainEpochs;
  cfg.crop = 32;
  cfg.noise_min = 0.005;
  cfg.noise_max = 0.01;

  const fs::path dir = fs::temp_directory_path() / "lirls_acceptance_train";
  fs::remove_all(dir);
  TrainOptions full_opt;
  full_opt.out_dir = dir / "full";
  const TrainResult full = train(initial_checkpoint(m, cfg), dataset, cfg, full_opt);

  char name[32];
  std::snprintf(name, sizeof name, "checkpoint_%03zu.bin", kTrainResumeFrom);
  TrainOptions resume_opt;
  resume_opt.out_dir = dir / "resumed";
  const TrainResult resumed = train(load_checkpoint(dir / "full" / name), dataset, cfg, resume_opt);
  fs::remove_all(dir);

  bool identical = checkpoint_bytes(full.final) == checkpoint_bytes(resumed.final) &&
                   resumed.log.size() == kTrainEpochs - kTrainResumeFrom;
  for (std::size_t i = 0; identical && i < resumed.log.size(); ++i) {
    const EpochLog& a = full.log[kTrainResumeFrom + i];
    const EpochLog& b = resumed.log[i];
    identical = a.epoch == b.epoch && a.train_loss == b.train_loss && a.val_psnr == b.val_psnr;
  }
  Vec neg_psnr;
  for (const EpochLog& e : full.log) neg_psnr.push_back(-e.val_psnr);
  const bool monotone = full.log.size() == kTrainEpochs &&
                        moving_average_non_increasing(neg_psnr, kTrainWindow);
  const double t = seconds_since(t0);
  return {monotone && identical && t < kTrainBudgetS,
          std::to_string(full.log.size()) + " epochs, validation PSNR " +
              fmt("%.2f", full.log.front().val_psnr) + " -> " + fmt("%.2f", full.log.back().val_psnr) +
              " dB, MA" + std::to_string(kTrainWindow) + " of -PSNR " +
              (monotone ? "non-increasing" : "INCREASES") + ", resume from epoch " +
              std::to_string(kTrainResumeFrom) + (identical ? " bit-identical" : " DIVERGES") + ", " +
              fmt("%.1f s", t)};
}

Line criterion_inits() {
  const auto t0 = Clock::now();
  DeskSpec s;
  s.seed = 500;
  s.size = 32;
  const Problem pr = desk_problem(s);
  IrlsLimits lim = desk_limits();
  lim.tolerance = 1e-8;
  lim.max_steps = 3000;
  lim.inner = SolveConfig{300, 1e-11, {}};
  const IrlsState a = irls_solve(pr, initial_estimate(pr).data(), lim);
  const IrlsState b = irls_solve(pr, Vec(pr.x_dims().size(), 0.5), lim);
  const double ja = a.objective_trace.back(), jb = b.objective_trace.back();
  const double rel = std::abs(ja - jb) / std::abs(ja);
  const double t = seconds_since(t0);
  return {rel <= kInitAgreementTol,
          "J from Wiener " + fmt("%.10g", ja) + ", from constant 0.5 " + fmt("%.10g", jb) +
              ", relative difference " + g(rel) + " (tol " + g(kInitAgreementTol) + "), " +
              fmt("%.1f s", t)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <data-dir> [criterion ...]\n", argv[0]);
    return 1;
  }
  const fs::path data = argv[1];
  std::set<int> wanted;
  for (int i = 2; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  const std::vector<std::pair<const char*, std::function<Line()>>> criteria = {
      {"adjoint identities", criterion_adjoint},
      {"majorizer gaps", criterion_majorizer},
      {"IRLS descent and convergence", criterion_desk},
      {"rate bound", criterion_rate},
      {"gradient oracles", criterion_gradients},
      {"CG, MINRES and Lanczos", criterion_dense},
      {"reconstruction quality", [&] { return criterion_quality(data); }},
      {"training", criterion_training},
      {"l1 init independence", criterion_inits},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Line line;
    try {
      line = criteria[i].second();
    } catch (const std::exception& e) {
      line = {false, std::string("error: ") + e.what()};
    }
    std::printf("[%s] %d %s: %s\n", line.pass ? "PASS" : "FAIL", id, criteria[i].first,
                line.detail.c_str());
    std::fflush(stdout);
    if (!line.pass) ++failed;
  }
  return failed ? 1 : 0;
}
