#include "doctest.h"
#include "ttt/parallel.hpp"
#include "ttt/random.hpp"

using namespace ttt;
using Md = Mat<double>;

namespace {

double max_rel_dev(const FastWeight<double>& a, const FastWeight<double>& b) {
  const auto one = [](const Md& x, const Md& y) {
    return ((x - y).cwiseAbs().array() / (y.cwiseAbs().array() + 1e-30)).maxCoeff();
  };
  return std::max({one(a.w1, b.w1), one(a.w2, b.w2), one(a.w3, b.w3)});
}

}  // namespace

TEST_CASE("split_contiguous covers without gaps") {
  const auto s = split_contiguous(64, 7);
  REQUIRE(s.size() == 7);
  Index covered = 0;
  for (const auto& [b, e] : s) {
    CHECK(b == covered);
    CHECK(e > b);
    covered = e;
  }
  CHECK(covered == 64);
  CHECK_THROWS_AS(split_contiguous(3, 4), ConfigError);
  CHECK_THROWS_AS(split_contiguous(3, 0), ConfigError);
}

TEST_CASE("cp_chunk_update equals the unsharded update") {
  auto rng = make_rng(40);
  const FastWeight<double> fw = init_fast_weight<double>(8, 12, rng);
  const Md k = gaussian_mat<double>(rng, 64, 8, 1.0);
  const Md v = gaussian_mat<double>(rng, 64, 8, 1.0);
  const Md lr = Md::Constant(64, 3, 0.02);

  for (UpdateRule rule : {UpdateRule::kGd, UpdateRule::kMomentum, UpdateRule::kMuon}) {
    OptimizerState<double> st_ref;
    st_ref.rule = rule;
    FastWeight<double> ref = fw;
    update_fast_weight(ref, chunk_gradient(fw, k, v, lr), st_ref, 0.5);

    SUBCASE("single shard is bit-identical") {}
    {
      OptimizerState<double> st;
      st.rule = rule;
      const FastWeight<double> got = cp_chunk_update(fw, k, v, lr, 1, st, 0.5);
      CHECK(got.w1 == ref.w1);
      CHECK(got.w2 == ref.w2);
      CHECK(got.w3 == ref.w3);
    }

    for (Index shards : {2, 4, 7}) {
      OptimizerState<double> st;
      st.rule = rule;
      const FastWeight<double> got = cp_chunk_update(fw, k, v, lr, shards, st, 0.5);
      CHECK(max_rel_dev(got, ref) < 1e-10);
    }
  }
}

TEST_CASE("cp_chunk_update is deterministic across repeated runs") {
  auto rng = make_rng(41);
  const FastWeight<double> fw = init_fast_weight<double>(6, 10, rng);
  const Md k = gaussian_mat<double>(rng, 20, 6, 1.0);
  const Md v = gaussian_mat<double>(rng, 20, 6, 1.0);
  const Md lr = Md::Constant(20, 3, 0.05);

  OptimizerState<double> st1, st2;
  st1.rule = st2.rule = UpdateRule::kMuon;
  const auto a = cp_chunk_update(fw, k, v, lr, 4, st1, 0.0);
  const auto b = cp_chunk_update(fw, k, v, lr, 4, st2, 0.0);
  CHECK(a.w1 == b.w1);
  CHECK(a.w2 == b.w2);
  CHECK(a.w3 == b.w3);
}

TEST_CASE("a zero-lr shard contributes nothing") {
  auto rng = make_rng(42);
  const FastWeight<double> fw = init_fast_weight<double>(6, 10, rng);
  const Md k = gaussian_mat<double>(rng, 16, 6, 1.0);
  const Md v = gaussian_mat<double>(rng, 16, 6, 1.0);
  Md lr = Md::Constant(16, 3, 0.05);
  lr.topRows(4).setZero();  // shard 0 of 4 goes quiet

  OptimizerState<double> st;
  const FastWeight<double> withquiet = cp_chunk_update(fw, k, v, lr, 4, st, 0.0);

  // Same tokens with shard 0 absent entirely.
  OptimizerState<double> st2;
  const FastWeight<double> without =
      cp_chunk_update<double>(fw, k.bottomRows(12), v.bottomRows(12), lr.bottomRows(12), 3, st2, 0.0);
  CHECK(max_rel_dev(withquiet, without) < 1e-12);
}

TEST_CASE("gather/scatter round-trip is the identity") {
  auto rng = make_rng(43);
  const Md x = gaussian_mat<double>(rng, 12, 8, 1.0);
  for (Index devices : {1, 2, 4}) {
    const auto sharded = shard_rows(x, devices);
    const auto cols = gather_seq_scatter_cols(sharded, devices);
    const auto back = gather_cols_scatter_seq(cols, split_contiguous(x.rows(), devices));
    CHECK(gather_rows(back) == x);
  }
}

TEST_CASE("tp_layer_forward matches the single-device forward") {
  LayerConfig cfg = make_layer_config(16, 4, 2, 4, UpdateRule::kMuon, 0.01);
  const auto params = init_layer_params<double>(cfg, 44);
  const Index L = 12;
  auto rng = make_rng(45);
  const Md x = gaussian_mat<double>(rng, L, 16, 1.0);
  const auto sched = blockwise_causal(L, 4);
  const Md ref = layer_forward(params, cfg, x, sched);

  SUBCASE("one shard is bitwise identical") {
    CHECK(tp_layer_forward(params, cfg, x, sched, 1) == ref);
  }
  SUBCASE("two and four shards agree to 1e-12") {
    for (Index shards : {2, 4}) {
      const Md got = tp_layer_forward(params, cfg, x, sched, shards);
      CHECK((got - ref).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("invalid shard counts are rejected") {
    CHECK_THROWS_AS(tp_layer_forward(params, cfg, x, sched, 3), ConfigError);
  }
}
