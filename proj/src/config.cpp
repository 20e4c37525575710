#include "lirls/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lirls/error.hpp"

namespace lirls {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size();
}

bool parse_int(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtoll(s.c_str(), &end, 10);
  return errno == 0 && end == s.c_str() + s.size();
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return out = true, true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return out = false, true;
  return false;
}

bool parse_list(const std::string& s, Vec& out) {
  out.clear();
  if (s.empty()) return true;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    if (!parse_real(trim(item), v)) return false;
    out.push_back(v);
  }
  return true;
}

bool valid_for(KeyType t, const std::string& v) {
  double d;
  std::int64_t i;
  bool b;
  Vec l;
  switch (t) {
    case KeyType::kString: return true;
    case KeyType::kReal: return v.empty() || parse_real(v, d);
    case KeyType::kInt: return parse_int(v, i);
    case KeyType::kBool: return parse_bool(v, b);
    case KeyType::kList: return parse_list(v, l);
  }
  return false;
}

const char* type_name(KeyType t) {
  switch (t) {
    case KeyType::kString: return "string";
    case KeyType::kReal: return "real";
    case KeyType::kInt: return "integer";
    case KeyType::kBool: return "boolean";
    case KeyType::kList: return "comma-separated reals";
  }
  return "?";
}

}  // namespace

const std::vector<KeySpec>& RunConfig::keys() {
  using K = KeyType;
  static const std::vector<KeySpec> table = {
      {"run.threads", K::kInt, "1", "worker threads for batch-level parallelism"},

      {"io.input", K::kString, "", "observation y (PNG or PFM)"},
      {"io.kernel", K::kString, "", "blur kernel (text matrix or PFM); deblur and sr"},
      {"io.output", K::kString, "", "reconstruction path (.png or .pfm)"},
      {"io.trace", K::kString, "", "per-step trace CSV (default: <output>.trace.csv)"},
      {"io.gt", K::kString, "", "ground truth for the metric report"},
      {"io.peak", K::kReal, "1", "PSNR/SSIM peak intensity"},

      {"degrade.sigma", K::kReal, "", "noise standard deviation (required for reconstruction)"},
      {"degrade.scale", K::kInt, "2", "super-resolution factor"},
      {"degrade.cfa", K::kString, "RGGB", "Bayer layout"},

      {"solver.max_steps", K::kInt, "15", "IRLS step cap"},
      {"solver.tol", K::kReal, "1e-4", "relative fixed-point residual for convergence"},
      {"solver.consecutive", K::kInt, "3", "steps the residual must stay below solver.tol"},
      {"solver.inner_max", K::kInt, "50", "PCG iteration cap per step"},
      {"solver.inner_tol", K::kReal, "1e-6", "PCG relative tolerance"},
      {"solver.precondition", K::kBool, "true", "circulant PCG preconditioner"},
      {"solver.delta", K::kReal, "8e-4", "proximal term alpha = delta * sigma^2"},
      {"solver.strict", K::kBool, "false", "abort on a descent violation instead of counting it"},

      {"prior.checkpoint", K::kString, "", "take bank and prior from a training checkpoint"},
      {"prior.family", K::kString, "sparse", "sparse | lowrank"},
      {"prior.p", K::kReal, "1", "exponent p"},
      {"prior.gamma", K::kReal, "1e-4", "smoothing gamma"},
      {"prior.weight", K::kReal, "1", "uniform weight value"},
      {"prior.weights", K::kList, "", "explicit weight vector (overrides prior.weight)"},
      {"prior.provider", K::kString, "fixed", "fixed | global | file (file needs prior.weight_map)"},
      {"prior.weight_map", K::kString, "", "PFM stack of per-position weights"},
      {"prior.bank", K::kString, "auto",
       "auto | dct | dct-per-channel | random | gradient | identity | <file.bank>"},
      {"prior.bank_size", K::kInt, "3", "filter support for dct and random banks"},
      {"prior.bank_filters", K::kInt, "8", "filter count for the random bank"},
      {"prior.bank_seed", K::kInt, "11", "seed of the random bank"},

      {"rate.lanczos_iterations", K::kInt, "300", "Lanczos steps for lambda_min"},
      {"rate.seed", K::kInt, "7", "Lanczos start vector seed"},
      {"rate.extension_steps", K::kInt, "400", "extra steps used to estimate J*"},
      {"rate.window", K::kInt, "10", "iterations in the observed-ratio window"},
      {"rate.fd_hvp", K::kBool, "false", "finite-difference Hessian products"},

      {"train.task", K::kString, "deblur", "deblur | sr | demosaick"},
      {"train.dataset", K::kString, "synthetic", "directory of PNG/PFM images, or 'synthetic'"},
      {"train.synthetic_count", K::kInt, "16", "images generated when train.dataset=synthetic"},
      {"train.synthetic_size", K::kInt, "64", "side length of generated images"},
      {"train.out_dir", K::kString, "", "checkpoints and log"},
      {"train.resume", K::kBool, "false", "continue from <out_dir>/latest.bin"},
      {"train.stop_after_epoch", K::kInt, "0", "stop early after this epoch (0: never)"},
      {"train.crop", K::kInt, "32", "crop side"},
      {"train.batch", K::kInt, "8", "samples per batch"},
      {"train.epochs", K::kInt, "30", "epochs"},
      {"train.batches_per_epoch", K::kInt, "4", "batches per epoch"},
      {"train.validation", K::kInt, "8", "fixed validation samples"},
      {"train.lr", K::kReal, "5e-3", "Adam learning rate"},
      {"train.lr_decay", K::kReal, "0.9", "per-epoch learning-rate factor"},
      {"train.noise_min", K::kReal, "0.005", "lower end of the noise range"},
      {"train.noise_max", K::kReal, "0.01", "upper end of the noise range"},
      {"train.kernel", K::kString, "gaussian", "gaussian | motion"},
      {"train.kernel_size", K::kInt, "5", "blur support"},
      {"train.sr_scale", K::kInt, "2", "SR factor during training"},
      {"train.seed", K::kInt, "1", "master seed"},
      {"train.learn", K::kString, "filters", "comma list of filters, weights, p"},
      {"train.max_skip", K::kReal, "0.2", "tolerated fraction of skipped samples per epoch"},
      {"train.loss_margin", K::kInt, "-1", "border excluded from the loss (-1: automatic)"},
      {"train.max_steps", K::kInt, "400", "forward IRLS cap during training"},
      {"train.inner_max", K::kInt, "150", "forward PCG cap during training"},
      {"train.backward_max", K::kInt, "2000", "adjoint solver cap"},
      {"train.backward_tol", K::kReal, "1e-2", "adjoint solver tolerance"},

      {"diagnose.task", K::kString, "deblur", "deblur | sr | demosaick"},
      {"diagnose.seed", K::kInt, "3", "synthetic fixture seed"},
      {"diagnose.size", K::kInt, "48", "synthetic fixture side"},
      {"diagnose.kernel", K::kString, "gaussian", "synthetic fixture kernel: gaussian | motion"},
      {"diagnose.kernel_size", K::kInt, "5", "synthetic fixture kernel support"},
      {"diagnose.mutation", K::kString, "none", "none | adjoint (transposed-kernel adjoint)"},
      {"diagnose.max_steps", K::kInt, "400", "IRLS cap for the diagnostic solve"},
      {"diagnose.inner_max", K::kInt, "150", "PCG cap for the diagnostic solve"},
      {"diagnose.adjoint_tol", K::kReal, "1e-6", "largest acceptable adjoint defect"},
  };
  return table;
}

const KeySpec* RunConfig::find_key(const std::string& name) {
  for (const auto& k : keys())
    if (k.name == name) return &k;
  return nullptr;
}

RunConfig::RunConfig() {
  for (const auto& k : keys()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_key(key);
  require(spec != nullptr, ErrorCode::kConfig, "unknown config key '" + key + "'");
  require(valid_for(spec->type, value), ErrorCode::kConfig,
          "config key '" + key + "' expects " + type_name(spec->type) + ", got '" + value + "'");
  values_[key] = value;
  explicit_[key] = true;
}

void RunConfig::assign(const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos, ErrorCode::kConfig,
          "expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      assign(line);
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  require(static_cast<bool>(f), ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  load_text(ss.str(), path.string());
}

bool RunConfig::is_set(const std::string& key) const {
  const auto it = explicit_.find(key);
  return it != explicit_.end() && it->second;
}

const std::string& RunConfig::raw(const std::string& key) const {
  const auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::kConfig, "unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::real(const std::string& key) const {
  double v = 0.0;
  require(parse_real(raw(key), v), ErrorCode::kConfig, "config key '" + key + "' is not set");
  return v;
}

std::int64_t RunConfig::integer(const std::string& key) const {
  std::int64_t v = 0;
  require(parse_int(raw(key), v), ErrorCode::kConfig, "config key '" + key + "' is not an integer");
  return v;
}

std::size_t RunConfig::count(const std::string& key) const {
  const std::int64_t v = integer(key);
  require(v >= 0, ErrorCode::kConfig, "config key '" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

bool RunConfig::flag(const std::string& key) const {
  bool b = false;
  require(parse_bool(raw(key), b), ErrorCode::kConfig, "config key '" + key + "' is not a boolean");
  return b;
}

Vec RunConfig::list(const std::string& key) const {
  Vec out;
  require(parse_list(raw(key), out), ErrorCode::kConfig, "config key '" + key + "' is not a list");
  return out;
}

std::string RunConfig::resolved() const {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + values_.at(k.name) + "\n";
  return out;
}

}  // namespace lirls
