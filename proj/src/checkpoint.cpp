#include <bit>
#include <cstring>
#include <fstream>

#include "lirls/error.hpp"
#include "lirls/training.hpp"

namespace lirls {

namespace {

constexpr char kMagic[8] = {'L', 'I', 'R', 'L', 'S', 'C', 'K', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void u64(std::uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), 8); }
  void f64(double v) { out_.write(reinterpret_cast<const char*>(&v), 8); }
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void vec(const Vec& v) {
    u64(v.size());
    if (!v.empty()) out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
  }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  std::uint64_t u64() {
    std::uint64_t v = 0;
    read(&v, 8);
    return v;
  }
  double f64() {
    double v = 0;
    read(&v, 8);
    return v;
  }
  std::uint8_t u8() {
    char c = 0;
    read(&c, 1);
    return static_cast<std::uint8_t>(c);
  }
  Vec vec() {
    const std::uint64_t n = u64();
    require(n < (1ULL << 32), ErrorCode::kFormat, "checkpoint: implausible vector length");
    Vec v(n);
    if (n) read(v.data(), n * 8);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    require(n < (1ULL << 24), ErrorCode::kFormat, "checkpoint: implausible string length");
    std::string s(n, '\0');
    if (n) read(s.data(), n);
    return s;
  }

 private:
  void read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    require(static_cast<std::size_t>(in_.gcount()) == n, ErrorCode::kFormat,
            "checkpoint: truncated file");
  }
  std::istream& in_;
};

}  // namespace

void write_checkpoint(const Checkpoint& c, std::ostream& out) {
  out.write(kMagic, sizeof kMagic);
  write_filter_bank(c.model.bank, out);
  Writer w(out);
  const PriorSpec& p = c.model.prior;
  w.u8(static_cast<std::uint8_t>(p.family));
  w.u8(static_cast<std::uint8_t>(p.provider));
  w.f64(p.p);
  w.f64(p.gamma);
  w.vec(p.weights);
  w.u64(p.weight_map.planes);
  w.u64(p.weight_map.height);
  w.u64(p.weight_map.width);
  w.vec(p.weight_map.data);
  w.f64(c.model.p_raw);
  w.u8(c.model.learn_p ? 1 : 0);
  w.u64(c.optimizer.step);
  w.vec(c.optimizer.m);
  w.vec(c.optimizer.v);
  w.vec(c.optimizer.v_max);
  w.u64(c.epoch);
  w.u64(c.seed);
  w.str(c.rng_state);
  require(static_cast<bool>(out), ErrorCode::kIo, "checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8] = {};
  in.read(magic, sizeof magic);
  require(in.gcount() == 8 && std::memcmp(magic, kMagic, 8) == 0, ErrorCode::kFormat,
          "checkpoint: missing LIRLSCK1 header");
  Checkpoint c;
  c.model.bank = read_filter_bank(in);
  Reader r(in);
  PriorSpec& p = c.model.prior;
  const auto family = r.u8(), provider = r.u8();
  require(family <= 1 && provider <= 2, ErrorCode::kFormat, "checkpoint: bad prior tags");
  p.family = static_cast<PriorFamily>(family);
  p.provider = static_cast<WeightProvider>(provider);
  p.p = r.f64();
  p.gamma = r.f64();
  p.weights = r.vec();
  p.weight_map.planes = r.u64();
  p.weight_map.height = r.u64();
  p.weight_map.width = r.u64();
  p.weight_map.data = r.vec();
  require(p.weight_map.data.size() == p.weight_map.planes * p.weight_map.positions(),
          ErrorCode::kFormat, "checkpoint: weight map shape mismatch");
  c.model.p_raw = r.f64();
  c.model.learn_p = r.u8() != 0;
  c.optimizer.step = r.u64();
  c.optimizer.m = r.vec();
  c.optimizer.v = r.vec();
  c.optimizer.v_max = r.vec();
  c.epoch = r.u64();
  c.seed = r.u64();
  c.rng_state = r.str();
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  // Write then rename, so an interrupted run never leaves a torn file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary);
    require(static_cast<bool>(f), ErrorCode::kIo, "cannot write checkpoint " + tmp.string());
    write_checkpoint(c, f);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::kIo, "cannot open checkpoint " + path.string());
  return read_checkpoint(f);
}

}  // namespace lirls
