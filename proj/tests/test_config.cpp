#include "doctest.h"
#include "ttt/checks.hpp"
#include "ttt/config.hpp"

using namespace ttt;

TEST_CASE("key=value parsing") {
  const auto cfg = KeyValueConfig::from_string(
      "# comment\n"
      "d = 32\n"
      "rule=muon\n"
      "\n"
      "lr=0.01\n"
      "seeds = 1, 2,3\n");
  CHECK(cfg.get_int("d", 0) == 32);
  CHECK(cfg.get_string("rule", "") == "muon");
  CHECK(cfg.get_double("lr", 0.0) == 0.01);
  CHECK(cfg.get_int_list("seeds", {}) == std::vector<std::int64_t>{1, 2, 3});
  CHECK(cfg.get_int("missing", 7) == 7);
  CHECK(!cfg.has("missing"));
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(KeyValueConfig::from_string("novalue\n"), ConfigError);
  const auto cfg = KeyValueConfig::from_string("d=abc\nxs=1,q\n");
  CHECK_THROWS_AS(cfg.get_int("d", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_int_list("xs", {}), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::from_file("/nonexistent/path.cfg"), ConfigError);
}

TEST_CASE("fw_loss_weighted reduces to fw_loss at unit weights") {
  auto rng = make_rng(60);
  const FastWeight<double> fw = init_fast_weight<double>(5, 7, rng);
  const Mat<double> k = gaussian_mat<double>(rng, 4, 5, 1.0);
  const Mat<double> v = gaussian_mat<double>(rng, 4, 5, 1.0);
  CHECK(fw_loss_weighted<double>(fw, k, v, Vec<double>::Ones(4)) ==
        doctest::Approx(fw_loss(fw, k, v)).epsilon(1e-12));
}

TEST_CASE("run_gradcheck passes on its default configuration") {
  GradCheckConfig gc;
  gc.num_seeds = 3;
  const auto res = run_gradcheck(gc);
  CHECK(res.pass);
  CHECK(res.seeds_run == 3);
  CHECK(res.max_rel_err < 1e-5);
}
