#include "doctest.h"
#include "lirls/app.hpp"
#include "lirls/error.hpp"

using namespace lirls;

TEST_CASE("defaults, typed access and validation") {
  RunConfig c;
  CHECK(c.integer("solver.max_steps") == 15);
  CHECK(c.real("solver.delta") == doctest::Approx(8e-4));
  CHECK(c.flag("solver.precondition"));
  CHECK_FALSE(c.is_set("solver.tol"));
  c.set("solver.tol", "1e-5");
  CHECK(c.is_set("solver.tol"));
  CHECK(c.real("solver.tol") == doctest::Approx(1e-5));
  CHECK_THROWS_AS(c.set("solver.tol", "fast"), Error);
  CHECK_THROWS_AS(c.set("solver.tolerance", "1"), Error);
  CHECK_THROWS_AS(c.assign("solver.tol"), Error);
  CHECK_THROWS_AS(c.real("degrade.sigma"), Error);
  c.assign(" prior.weights = 1, 2.5 ,3 ");
  CHECK(c.list("prior.weights") == Vec{1.0, 2.5, 3.0});
  CHECK_THROWS_AS(c.set("prior.weights", "1,,2"), Error);
  CHECK_THROWS_AS(c.set("train.resume", "maybe"), Error);
}

TEST_CASE("config text with comments") {
  RunConfig c;
  c.load_text("# header\nsolver.max_steps = 30  # trailing\n\nprior.p=0.7\n", "inline");
  CHECK(c.integer("solver.max_steps") == 30);
  CHECK(c.real("prior.p") == doctest::Approx(0.7));
  try {
    c.load_text("prior.p = 0.5\nbogus.key = 1\n", "cfg.txt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
    CHECK(std::string(e.what()).find("cfg.txt:2") != std::string::npos);
  }
}

TEST_CASE("resolved config lists every key once") {
  RunConfig c;
  c.set("io.output", "x.png");
  const std::string r = c.resolved();
  CHECK(r.find("io.output = x.png\n") != std::string::npos);
  std::size_t lines = 0;
  for (char ch : r) lines += ch == '\n';
  CHECK(lines == RunConfig::keys().size());
}

TEST_CASE("model construction from keys") {
  RunConfig c;
  const Model sparse = model_from_config(c, 3);
  CHECK(sparse.bank.filters() == 24);
  CHECK(sparse.prior.weights.size() == 24);
  c.set("prior.family", "lowrank");
  const Model lr = model_from_config(c, 3);
  CHECK(lr.bank.c_in() == 1);
  CHECK(lr.prior.weights.size() == 3);
  c.set("prior.family", "sparse");
  c.set("prior.bank", "random");
  c.set("prior.bank_filters", "8");
  const Model rnd = model_from_config(c, 3);
  CHECK(rnd.bank.filters() == 8);
  CHECK(rnd.bank.c_in() == 3);
  c.set("prior.bank", "no-such-bank.bank");
  CHECK_THROWS_AS(model_from_config(c, 3), Error);
}

TEST_CASE("unknown commands are rejected") {
  RunConfig c;
  CHECK_THROWS_AS(run_command("denoise", c), Error);
}
