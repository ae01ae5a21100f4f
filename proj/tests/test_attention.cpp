#include <cmath>

#include "doctest.h"
#include "ttt/attention.hpp"
#include "ttt/random.hpp"

using namespace ttt;
using Md = Mat<double>;

TEST_CASE("full_attention_oracle basics") {
  auto rng = make_rng(1);
  SUBCASE("single token returns v") {
    const Md q = gaussian_mat<double>(rng, 1, 4, 1.0);
    const Md k = gaussian_mat<double>(rng, 1, 4, 1.0);
    const Md v = gaussian_mat<double>(rng, 1, 4, 1.0);
    CHECK((full_attention_oracle(q, k, v, true) - v).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((full_attention_oracle(q, k, v, false) - v).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("identical keys average the values") {
    const Index l = 5;
    const Md q = gaussian_mat<double>(rng, l, 4, 1.0);
    const Md k = Md::Ones(l, 4);
    const Md v = gaussian_mat<double>(rng, l, 4, 1.0);
    const Md bi = full_attention_oracle(q, k, v, false);
    const Md causal = full_attention_oracle(q, k, v, true);
    for (Index i = 0; i < l; ++i) {
      const Md mean_all = v.colwise().mean();
      CHECK((bi.row(i) - mean_all).cwiseAbs().maxCoeff() < 1e-12);
      const Md mean_prefix = v.topRows(i + 1).colwise().mean();
      CHECK((causal.row(i) - mean_prefix).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("attention weights are a row-stochastic convex combination") {
  // Recover the weights by attending with one-hot values.
  auto rng = make_rng(2);
  const Index l = 16;
  const Md q = gaussian_mat<double>(rng, l, 8, 1.0);
  const Md k = gaussian_mat<double>(rng, l, 8, 1.0);
  const Md w = full_attention_oracle<double>(q, k, Md::Identity(l, l), false);
  for (Index i = 0; i < l; ++i) {
    CHECK(std::abs(w.row(i).sum() - 1.0) < 1e-12);
    CHECK(w.row(i).minCoeff() >= 0.0);
  }
}

TEST_CASE("window_attention sliding causal") {
  auto rng = make_rng(3);
  const Index l = 12, hd = 6;
  const Md q = gaussian_mat<double>(rng, l, hd, 1.0);
  const Md k = gaussian_mat<double>(rng, l, hd, 1.0);
  const Md v = gaussian_mat<double>(rng, l, hd, 1.0);

  SUBCASE("window 1 returns v exactly") {
    const Md got = window_attention(q, k, v, {WindowKind::kSlidingCausal, 1});
    CHECK(got == v);
  }
  SUBCASE("window >= l equals full causal attention") {
    const Md got = window_attention(q, k, v, {WindowKind::kSlidingCausal, l});
    CHECK((got - full_attention_oracle(q, k, v, true)).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("token i ignores anything at or before i - window") {
    const Index window = 3;
    const Md base = window_attention(q, k, v, {WindowKind::kSlidingCausal, window});
    Md k2 = k, v2 = v;
    const Index i = 9;
    for (Index j = 0; j <= i - window; ++j) {
      k2.row(j).setConstant(17.0);
      v2.row(j).setConstant(-5.0);
    }
    const Md moved = window_attention(q, k2, v2, {WindowKind::kSlidingCausal, window});
    CHECK(moved.row(i) == base.row(i));
  }
}

TEST_CASE("window_attention block bidirectional") {
  auto rng = make_rng(4);
  const Index l = 12, hd = 6;
  const Md q = gaussian_mat<double>(rng, l, hd, 1.0);
  const Md k = gaussian_mat<double>(rng, l, hd, 1.0);
  const Md v = gaussian_mat<double>(rng, l, hd, 1.0);

  SUBCASE("block length l equals full bidirectional attention") {
    const Md got = window_attention(q, k, v, {WindowKind::kBlockBidirectional, l});
    CHECK((got - full_attention_oracle(q, k, v, false)).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("permuting tokens inside a block permutes outputs identically") {
    const Index block = 4;
    const WindowSpec spec{WindowKind::kBlockBidirectional, block};
    const Md base = window_attention(q, k, v, spec);
    // Swap tokens 5 and 6 (same block).
    Md q2 = q, k2 = k, v2 = v;
    q2.row(5).swap(q2.row(6));
    k2.row(5).swap(k2.row(6));
    v2.row(5).swap(v2.row(6));
    const Md swapped = window_attention(q2, k2, v2, spec);
    CHECK((swapped.row(5) - base.row(6)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((swapped.row(6) - base.row(5)).cwiseAbs().maxCoeff() < 1e-12);
    for (Index i = 0; i < l; ++i) {
      if (i == 5 || i == 6) continue;
      CHECK((swapped.row(i) - base.row(i)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("window_attention rejects bad shapes") {
  CHECK_THROWS_AS(window_attention<double>(Md::Zero(3, 4), Md::Zero(2, 4), Md::Zero(3, 4),
                                           {WindowKind::kSlidingCausal, 2}),
                  DimensionError);
}

TEST_CASE("attention_mask shapes") {
  const BoolMat sliding = attention_mask({WindowKind::kSlidingCausal, 3}, 6);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j) CHECK(sliding(i, j) == (j <= i && i - j < 3));

  const BoolMat block = attention_mask({WindowKind::kBlockBidirectional, 4}, 6);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j) CHECK(block(i, j) == (i / 4 == j / 4));
}
