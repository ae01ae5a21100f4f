#pragma once

#include <vector>

#include "ttt/layer.hpp"
#include "ttt/types.hpp"

namespace ttt {

// Contiguous split of l tokens into `shards` non-empty slices; the first
// l % shards slices take one extra token.
inline std::vector<IndexRange> split_contiguous(Index l, Index shards) {
  if (shards < 1 || shards > l) throw ConfigError("parallel: shard count must be in [1, tokens]");
  std::vector<IndexRange> out;
  const Index base = l / shards;
  const Index rem = l % shards;
  Index b = 0;
  for (Index s = 0; s < shards; ++s) {
    const Index n = base + (s < rem ? 1 : 0);
    out.emplace_back(b, b + n);
    b += n;
  }
  return out;
}

// Context-parallel chunk update: every shard computes its local gradient
// against the same incoming fast weight, gradients are summed in ascending
// shard order (the simulated all-reduce), and the weight-update rule runs once
// on the aggregate. Semantically identical to the unsharded update.
template <class Scalar>
FastWeight<Scalar> cp_chunk_update(const FastWeight<Scalar>& fw, const Mat<Scalar>& k,
                                   const Mat<Scalar>& v, const Mat<Scalar>& lr, Index shards,
                                   OptimizerState<Scalar>& st, Scalar beta_mean = Scalar(0)) {
  const auto slices = split_contiguous(k.rows(), shards);

  std::vector<FwGrads<Scalar>> local(static_cast<size_t>(shards));
  for (Index s = 0; s < shards; ++s) {
    const auto [b, e] = slices[static_cast<size_t>(s)];
    local[static_cast<size_t>(s)] =
        chunk_gradient<Scalar>(fw, Mat<Scalar>(k.middleRows(b, e - b)),
                               Mat<Scalar>(v.middleRows(b, e - b)),
                               Mat<Scalar>(lr.middleRows(b, e - b)));
  }

  FwGrads<Scalar> total = local[0];
  for (size_t s = 1; s < local.size(); ++s) {
    total.g1 += local[s].g1;
    total.g2 += local[s].g2;
    total.g3 += local[s].g3;
  }

  FastWeight<Scalar> updated = fw;
  update_fast_weight(updated, total, st, beta_mean);
  return updated;
}

// A sequence-sharded tensor: one [l_local, w] slice per device, ascending
// token order.
template <class Scalar>
struct ShardedSeq {
  BatchMat<Scalar> per_device;
};

template <class Scalar>
ShardedSeq<Scalar> shard_rows(const Mat<Scalar>& x, Index devices) {
  ShardedSeq<Scalar> s;
  for (const auto& [b, e] : split_contiguous(x.rows(), devices)) {
    s.per_device.push_back(x.middleRows(b, e - b));
  }
  return s;
}

template <class Scalar>
Mat<Scalar> gather_rows(const ShardedSeq<Scalar>& s) {
  Index rows = 0;
  for (const auto& m : s.per_device) rows += m.rows();
  Mat<Scalar> out(rows, s.per_device.front().cols());
  Index b = 0;
  for (const auto& m : s.per_device) {
    out.middleRows(b, m.rows()) = m;
    b += m.rows();
  }
  return out;
}

// Gather along the sequence dim, then hand each device its contiguous column
// group (the per-head slices it owns). Inverse of scatter_rows_of.
template <class Scalar>
BatchMat<Scalar> gather_seq_scatter_cols(const ShardedSeq<Scalar>& s, Index devices) {
  const Mat<Scalar> full = gather_rows(s);
  require_dims(full.cols() % devices == 0, "gather_scatter: device count must divide width");
  const Index w = full.cols() / devices;
  BatchMat<Scalar> out;
  for (Index dvc = 0; dvc < devices; ++dvc) out.push_back(full.middleCols(dvc * w, w));
  return out;
}

// Reverse transform: gather the column groups, then scatter rows back to the
// original sequence shards.
template <class Scalar>
ShardedSeq<Scalar> gather_cols_scatter_seq(const BatchMat<Scalar>& cols,
                                           const std::vector<IndexRange>& row_slices) {
  Index width = 0;
  for (const auto& m : cols) width += m.cols();
  Mat<Scalar> full(cols.front().rows(), width);
  Index c = 0;
  for (const auto& m : cols) {
    full.middleCols(c, m.cols()) = m;
    c += m.cols();
  }
  ShardedSeq<Scalar> s;
  for (const auto& [b, e] : row_slices) s.per_device.push_back(full.middleRows(b, e - b));
  return s;
}

// Tensor parallelism over heads: each simulated device projects its own
// sequence shard, the per-head tensors are gathered along the sequence and
// scattered along heads, every device runs the full-sequence recurrence for
// its head subset, and the reverse transform restores sequence sharding
// before the output projection.
template <class Scalar>
Mat<Scalar> tp_layer_forward(const LayerParams<Scalar>& params, const LayerConfig& cfg,
                             const Mat<Scalar>& x, const ChunkSchedule& sched, Index head_shards) {
  cfg.validate();
  if (head_shards < 1 || cfg.nh % head_shards != 0) {
    throw ConfigError("tp_layer_forward: head shard count must divide head count");
  }
  require_dims(x.cols() == cfg.d, "tp_layer_forward: input width != model dim");
  require_dims(x.rows() == sched.seq_len, "tp_layer_forward: schedule/sequence length mismatch");

  const Index hd = cfg.head_dim();
  const Index heads_per_dev = cfg.nh / head_shards;
  const auto row_slices = split_contiguous(x.rows(), head_shards);

  // Local projections on each device's sequence shard.
  ShardedSeq<Scalar> q_sh, k_sh, v_sh, lr_sh, beta_sh;
  const bool needs_beta = cfg.rule != UpdateRule::kGd;
  for (const auto& [b, e] : row_slices) {
    const Mat<Scalar> xs = x.middleRows(b, e - b);
    const Mat<Scalar> qkv = silu(Mat<Scalar>(xs * params.qkv_proj));
    q_sh.per_device.push_back(qkv.middleCols(0, cfg.d));
    k_sh.per_device.push_back(qkv.middleCols(cfg.d, cfg.d));
    v_sh.per_device.push_back(qkv.middleCols(2 * cfg.d, cfg.d));
    lr_sh.per_device.push_back(
        softplus(Mat<Scalar>((xs * params.lr_proj).array() + Scalar(cfg.const_lr_bias))));
    if (needs_beta) {
      beta_sh.per_device.push_back(
          Mat<Scalar>(xs * params.beta_proj).unaryExpr([](Scalar s) { return sigmoid(s); }));
    }
  }

  // Gather sequence, scatter heads.
  const BatchMat<Scalar> q_dev = gather_seq_scatter_cols(q_sh, head_shards);
  const BatchMat<Scalar> k_dev = gather_seq_scatter_cols(k_sh, head_shards);
  const BatchMat<Scalar> v_dev = gather_seq_scatter_cols(v_sh, head_shards);
  const BatchMat<Scalar> lr_dev = gather_seq_scatter_cols(lr_sh, head_shards);
  Vec<Scalar> beta;
  if (needs_beta) beta = gather_rows(beta_sh).col(0);

  // Full-sequence recurrence on each device's head subset.
  BatchMat<Scalar> o_dev;
  for (Index dvc = 0; dvc < head_shards; ++dvc) {
    Mat<Scalar> o(x.rows(), heads_per_dev * hd);
    for (Index hl = 0; hl < heads_per_dev; ++hl) {
      const Index h = dvc * heads_per_dev + hl;
      ChunkTokens<Scalar> t = detail::head_tokens<Scalar>(
          q_dev[static_cast<size_t>(dvc)], k_dev[static_cast<size_t>(dvc)],
          v_dev[static_cast<size_t>(dvc)], lr_dev[static_cast<size_t>(dvc)], hl, hd,
          /*silu_norm_qk=*/false);
      FastWeight<Scalar> fw = params.fw0[static_cast<size_t>(h)];
      OptimizerState<Scalar> st;
      st.rule = cfg.rule;
      st.ns_iters = cfg.ns_iters;
      st.norm_mode = cfg.norm_mode;
      Mat<Scalar> oh = run_schedule(fw, st, t, sched, needs_beta ? &beta : nullptr);
      o.middleCols(hl * hd, hd) = rms_norm_rows(oh);
    }
    o_dev.push_back(std::move(o));
  }

  // Reverse transform and per-device output projection.
  const ShardedSeq<Scalar> o_seq = gather_cols_scatter_seq(o_dev, row_slices);
  Mat<Scalar> out(x.rows(), cfg.d);
  for (Index dvc = 0; dvc < head_shards; ++dvc) {
    const auto [b, e] = row_slices[static_cast<size_t>(dvc)];
    out.middleRows(b, e - b) = o_seq.per_device[static_cast<size_t>(dvc)] * params.out_proj;
  }
  return out;
}

}  // namespace ttt
