#pragma once

#include <cstdint>
#include <vector>

#include "ttt/layer.hpp"
#include "ttt/parallel.hpp"
#include "ttt/random.hpp"
#include "ttt/schedule.hpp"
#include "ttt/types.hpp"

namespace ttt {

// eta-weighted dot-product loss, one weight column at a time:
// sum_i eta_i * -f(k_i)^T v_i.
template <class Scalar>
Scalar fw_loss_weighted(const FastWeight<Scalar>& fw, const Mat<Scalar>& k, const Mat<Scalar>& v,
                        const Vec<Scalar>& eta) {
  require_dims(eta.size() == k.rows(), "fw_loss_weighted: eta length mismatch");
  const Mat<Scalar> f = apply_fw(fw, k);
  Scalar loss = 0;
  for (Index i = 0; i < k.rows(); ++i) loss += eta(i) * -f.row(i).dot(v.row(i));
  return loss;
}

struct GradCheckConfig {
  Index d = 6;
  Index dh = 8;
  Index l = 5;
  int num_seeds = 20;
  double step = 1e-5;
  double tol = 1e-5;
  std::uint64_t base_seed = 1;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  int seeds_run = 0;
  bool pass = false;
};

// Central finite differences of the weighted loss against the analytic chunk
// gradient, entry by entry, over `num_seeds` random instances.
inline GradCheckResult run_gradcheck(const GradCheckConfig& cfg) {
  GradCheckResult res;
  for (int s = 0; s < cfg.num_seeds; ++s) {
    const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(s);
    auto rng = make_rng(seed, 700);
    FastWeight<double> fw = init_fast_weight<double>(cfg.d, cfg.dh, rng);
    const Mat<double> k = gaussian_mat<double>(rng, cfg.l, cfg.d, 1.0);
    const Mat<double> v = gaussian_mat<double>(rng, cfg.l, cfg.d, 1.0);
    const Mat<double> lr = gaussian_mat<double>(rng, cfg.l, 3, 1.0).cwiseAbs();

    const FwGrads<double> g = chunk_gradient(fw, k, v, lr);
    for (int which = 0; which < 3; ++which) {
      Mat<double>& target = which == 0 ? fw.w1 : which == 1 ? fw.w2 : fw.w3;
      const Mat<double>& analytic = which == 0 ? g.g1 : which == 1 ? g.g2 : g.g3;
      const Vec<double> eta = lr.col(which);
      for (Index i = 0; i < target.rows(); ++i) {
        for (Index j = 0; j < target.cols(); ++j) {
          const double saved = target(i, j);
          target(i, j) = saved + cfg.step;
          const double up = fw_loss_weighted(fw, k, v, eta);
          target(i, j) = saved - cfg.step;
          const double down = fw_loss_weighted(fw, k, v, eta);
          target(i, j) = saved;
          const double fd = (up - down) / (2.0 * cfg.step);
          const double rel = std::abs(fd - analytic(i, j)) /
                             (std::max(std::abs(fd), std::abs(analytic(i, j))) + 1e-8);
          res.max_rel_err = std::max(res.max_rel_err, rel);
        }
      }
    }
    ++res.seeds_run;
  }
  res.pass = res.max_rel_err < cfg.tol;
  return res;
}

// Empirical dependency matrix: perturb each token's key/value and record which
// outputs move beyond tol. q rows are left alone so the matrix captures k/v
// influence only, matching dependency_mask semantics.
inline BoolMat perturbation_mask(const ChunkSchedule& sched, Index d, Index dh, std::uint64_t seed,
                                 double lr_value = 0.1, double tol = 1e-9) {
  const Index L = sched.seq_len;
  auto rng = make_rng(seed, 900);
  const FastWeight<double> fw0 = init_fast_weight<double>(d, dh, rng);
  ChunkTokens<double> tokens;
  tokens.q = gaussian_mat<double>(rng, L, d, 1.0);
  tokens.k = gaussian_mat<double>(rng, L, d, 1.0);
  tokens.v = gaussian_mat<double>(rng, L, d, 1.0);
  tokens.lr = Mat<double>::Constant(L, 3, lr_value);

  const auto run = [&](const ChunkTokens<double>& t) {
    FastWeight<double> fw = fw0;
    OptimizerState<double> st;
    return run_schedule(fw, st, t, sched);
  };
  const Mat<double> base = run(tokens);

  BoolMat mask(L, L);
  for (Index j = 0; j < L; ++j) {
    ChunkTokens<double> t = tokens;
    auto rng_j = make_rng(seed, 1000 + static_cast<std::uint64_t>(j));
    t.k.row(j) += gaussian_mat<double>(rng_j, 1, d, 0.5).row(0);
    t.v.row(j) += gaussian_mat<double>(rng_j, 1, d, 0.5).row(0);
    const Mat<double> moved = run(t);
    for (Index i = 0; i < L; ++i) {
      mask(i, j) = (moved.row(i) - base.row(i)).cwiseAbs().maxCoeff() > tol;
    }
  }
  return mask;
}

struct ShardCheck {
  Index shards = 0;
  double max_rel_dev = 0.0;
  bool pass = false;
};

struct ParallelCheckConfig {
  UpdateRule rule = UpdateRule::kMuon;
  std::uint64_t seed = 1;
  // CP side: one chunk of tokens against a standalone fast weight.
  Index cp_d = 8;
  Index cp_dh = 12;
  Index cp_tokens = 64;
  std::vector<Index> cp_shards = {1, 2, 4, 7};
  double cp_tol = 1e-10;
  // TP side: a full layer forward; tp_shards entries must divide nh.
  Index d = 16;
  Index nh = 4;
  Index r = 2;
  Index chunk = 4;
  Index seq_len = 12;
  std::vector<Index> tp_shards = {1, 2, 4};
  double tp_tol = 1e-12;
};

struct ParallelCheckResult {
  std::vector<ShardCheck> cp;
  std::vector<ShardCheck> tp;
  bool pass = false;
};

// CP: shard one chunk and compare the resulting fast weight against the
// unsharded update. TP: shard heads and compare the full forward.
inline ParallelCheckResult run_parallel_check(const ParallelCheckConfig& pc) {
  ParallelCheckResult res;

  {
    auto rng = make_rng(pc.seed, 1100);
    const FastWeight<double> fw = init_fast_weight<double>(pc.cp_d, pc.cp_dh, rng);
    const Mat<double> k = gaussian_mat<double>(rng, pc.cp_tokens, pc.cp_d, 1.0);
    const Mat<double> v = gaussian_mat<double>(rng, pc.cp_tokens, pc.cp_d, 1.0);
    const Mat<double> lr = Mat<double>::Constant(pc.cp_tokens, 3, 0.02);

    OptimizerState<double> st_ref;
    st_ref.rule = pc.rule;
    FastWeight<double> ref = fw;
    update_fast_weight(ref, chunk_gradient(fw, k, v, lr), st_ref, 0.5);

    const auto rel = [](const Mat<double>& a, const Mat<double>& b) {
      return ((a - b).cwiseAbs().array() / (b.cwiseAbs().array() + 1e-30)).maxCoeff();
    };
    for (Index shards : pc.cp_shards) {
      OptimizerState<double> st;
      st.rule = pc.rule;
      const FastWeight<double> got = cp_chunk_update(fw, k, v, lr, shards, st, 0.5);
      ShardCheck c;
      c.shards = shards;
      c.max_rel_dev = std::max({rel(got.w1, ref.w1), rel(got.w2, ref.w2), rel(got.w3, ref.w3)});
      c.pass = c.max_rel_dev <= pc.cp_tol;
      res.cp.push_back(c);
    }
  }

  {
    const LayerConfig cfg = make_layer_config(pc.d, pc.nh, pc.r, pc.chunk, pc.rule, 0.01);
    const auto params = init_layer_params<double>(cfg, pc.seed);
    auto rng = make_rng(pc.seed, 1200);
    const Mat<double> x = gaussian_mat<double>(rng, pc.seq_len, pc.d, 1.0);
    const auto sched = blockwise_causal(pc.seq_len, pc.chunk);
    const Mat<double> ref = layer_forward(params, cfg, x, sched);
    for (Index shards : pc.tp_shards) {
      const Mat<double> got = tp_layer_forward(params, cfg, x, sched, shards);
      ShardCheck c;
      c.shards = shards;
      c.max_rel_dev = (got - ref).cwiseAbs().maxCoeff();  // absolute, per the TP contract
      c.pass = c.max_rel_dev <= pc.tp_tol;
      res.tp.push_back(c);
    }
  }

  res.pass = true;
  for (const auto& c : res.cp) res.pass = res.pass && c.pass;
  for (const auto& c : res.tp) res.pass = res.pass && c.pass;
  return res;
}

inline ParallelCheckResult run_parallel_check(std::uint64_t seed, UpdateRule rule) {
  ParallelCheckConfig pc;
  pc.seed = seed;
  pc.rule = rule;
  return run_parallel_check(pc);
}

}  // namespace ttt
