#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ttt/attention.hpp"
#include "ttt/core.hpp"
#include "ttt/fast_weight.hpp"
#include "ttt/optim.hpp"
#include "ttt/random.hpp"
#include "ttt/schedule.hpp"
#include "ttt/types.hpp"

namespace ttt {

struct LayerConfig {
  Index d = 16;       // model dim
  Index nh = 2;       // head count; must divide d
  Index r = 1;        // fast-weight hidden = hd * r
  Index chunk = 4;    // tokens per chunk
  UpdateRule rule = UpdateRule::kGd;
  int ns_iters = kDefaultNsIters;
  NormMode norm_mode = NormMode::kPreserve;
  double const_lr_bias = softplus_inverse(0.01);  // initial per-token lr of 0.01
  WindowSpec window;                              // hybrid only
  Precision precision = Precision::kDouble;

  Index head_dim() const { return d / nh; }
  Index fw_hidden() const { return head_dim() * r; }

  void validate() const {
    if (nh < 1 || d % nh != 0) throw ConfigError("layer: head count must divide model dim");
    if (r < 1) throw ConfigError("layer: intermediate multiplier must be >= 1");
    if (chunk < 1) throw ConfigError("layer: chunk must be >= 1");
  }
};

inline LayerConfig make_layer_config(Index d, Index nh, Index r, Index chunk,
                                     UpdateRule rule = UpdateRule::kGd,
                                     double initial_lr = 0.01) {
  LayerConfig cfg;
  cfg.d = d;
  cfg.nh = nh;
  cfg.r = r;
  cfg.chunk = chunk;
  cfg.rule = rule;
  cfg.const_lr_bias = softplus_inverse(initial_lr);
  cfg.validate();
  return cfg;
}

// Fast-weight reals held by one layer: three hd x (hd*r)-sized matrices per head.
inline std::uint64_t layer_state_size(const LayerConfig& cfg) {
  const auto hd = static_cast<std::uint64_t>(cfg.head_dim());
  return 3ull * static_cast<std::uint64_t>(cfg.nh) * hd * (hd * static_cast<std::uint64_t>(cfg.r));
}

template <class Scalar>
struct LayerParams {
  Mat<Scalar> qkv_proj;   // [d, 3d]
  Mat<Scalar> lr_proj;    // [d, 3*nh], zero-initialized
  Mat<Scalar> out_proj;   // [d, d]
  Vec<Scalar> beta_proj;  // [d], scalar momentum predictor
  std::vector<FastWeight<Scalar>> fw0;  // initial fast weight per head

  // Hybrid extras: per-channel q/k rescale for the attention branch and a
  // zero-initialized per-head output gate for the recurrent branch.
  Vec<Scalar> q_scale, q_shift, k_scale, k_shift;  // [d]
  Mat<Scalar> ttt_scale_proj;                      // [d, nh]
};

template <class Scalar>
LayerParams<Scalar> init_layer_params(const LayerConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Scalar proj_std = Scalar(0.02);
  LayerParams<Scalar> p;
  auto rng_qkv = make_rng(seed, 0);
  p.qkv_proj = gaussian_mat<Scalar>(rng_qkv, cfg.d, 3 * cfg.d, proj_std);
  p.lr_proj = Mat<Scalar>::Zero(cfg.d, 3 * cfg.nh);
  auto rng_out = make_rng(seed, 1);
  p.out_proj = gaussian_mat<Scalar>(rng_out, cfg.d, cfg.d, proj_std);
  auto rng_beta = make_rng(seed, 2);
  p.beta_proj = gaussian_vec<Scalar>(rng_beta, cfg.d, proj_std);
  for (Index h = 0; h < cfg.nh; ++h) {
    auto rng_fw = make_rng(seed, 16 + static_cast<std::uint64_t>(h));
    p.fw0.push_back(init_fast_weight<Scalar>(cfg.head_dim(), cfg.fw_hidden(), rng_fw));
  }
  p.q_scale = Vec<Scalar>::Ones(cfg.d);
  p.q_shift = Vec<Scalar>::Zero(cfg.d);
  p.k_scale = Vec<Scalar>::Ones(cfg.d);
  p.k_shift = Vec<Scalar>::Zero(cfg.d);
  p.ttt_scale_proj = Mat<Scalar>::Zero(cfg.d, cfg.nh);
  return p;
}

// Mean over the chunk of per-token sigmoid(x . beta_proj); the chunk-level
// momentum coefficient.
template <class Scalar>
Scalar chunk_beta_mean(const LayerParams<Scalar>& params, const Mat<Scalar>& x_chunk) {
  require_dims(x_chunk.rows() >= 1, "chunk_beta_mean: empty chunk");
  require_dims(x_chunk.cols() == params.beta_proj.size(), "chunk_beta_mean: width mismatch");
  Scalar acc = 0;
  for (Index i = 0; i < x_chunk.rows(); ++i) acc += sigmoid(Scalar(x_chunk.row(i).dot(params.beta_proj)));
  return acc / Scalar(x_chunk.rows());
}

template <class Scalar>
void do_update(FastWeight<Scalar>& fw, OptimizerState<Scalar>& st, const ChunkTokens<Scalar>& tokens,
               const ChunkOp& op, const Vec<Scalar>* beta) {
  const Index n = op.end - op.begin;
  FwGrads<Scalar> g;
  try {
    g = chunk_gradient<Scalar>(fw, tokens.k.middleRows(op.begin, n), tokens.v.middleRows(op.begin, n),
                               tokens.lr.middleRows(op.begin, n));
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " in chunk [" + std::to_string(op.begin) + ", " +
                       std::to_string(op.end) + ")");
  }
  const Scalar beta_mean = beta ? Scalar(beta->segment(op.begin, n).mean()) : Scalar(0);
  update_fast_weight(fw, g, st, beta_mean);
}

// Executes a schedule against one fast-weight instance. `beta` holds the
// per-token momentum predictions for the whole sequence (ignored by the GD
// rule); each update op uses the mean over its own tokens.
template <class Scalar>
Mat<Scalar> run_schedule(FastWeight<Scalar>& fw, OptimizerState<Scalar>& st,
                         const ChunkTokens<Scalar>& tokens, const ChunkSchedule& sched,
                         const Vec<Scalar>* beta = nullptr) {
  validate_tokens(tokens);
  sched.validate();
  require_dims(tokens.k.rows() == sched.seq_len, "run_schedule: schedule/sequence length mismatch");

  Mat<Scalar> out = Mat<Scalar>::Zero(sched.seq_len, fw.w2.cols());
  for (const ChunkOp& op : sched.ops) {
    const Index n = op.end - op.begin;
    if (mode_updates(op.mode) && op.mode != ChunkMode::kApplyThenUpdate) {
      do_update(fw, st, tokens, op, beta);
    }
    if (mode_applies(op.mode)) {
      out.middleRows(op.begin, n) = apply_fw(fw, Mat<Scalar>(tokens.q.middleRows(op.begin, n)));
      if (!out.middleRows(op.begin, n).allFinite()) {
        throw NumericError("run_schedule: non-finite output in chunk [" +
                           std::to_string(op.begin) + ", " + std::to_string(op.end) + ")");
      }
    }
    if (op.mode == ChunkMode::kApplyThenUpdate) {
      do_update(fw, st, tokens, op, beta);
    }
  }
  return out;
}

// Per-head intermediates captured for tests.
template <class Scalar>
struct LayerTrace {
  BatchMat<Scalar> head_outputs;  // post-RMSNorm, pre-concat, one [L, hd*] entry per head
};

namespace detail {

template <class Scalar>
ChunkTokens<Scalar> head_tokens(const Mat<Scalar>& q, const Mat<Scalar>& k, const Mat<Scalar>& v,
                                const Mat<Scalar>& lr, Index h, Index hd, bool silu_norm_qk) {
  ChunkTokens<Scalar> t;
  t.q = q.middleCols(h * hd, hd);
  t.k = k.middleCols(h * hd, hd);
  t.v = v.middleCols(h * hd, hd);
  if (silu_norm_qk) {
    t.q = l2_normalize_rows<Scalar>(silu(t.q));
    t.k = l2_normalize_rows<Scalar>(silu(t.k));
  } else {
    t.q = l2_normalize_rows<Scalar>(t.q);
    t.k = l2_normalize_rows<Scalar>(t.k);
  }
  t.lr = lr.middleCols(3 * h, 3);
  return t;
}

}  // namespace detail

// Full multi-head layer: shared qkv projection with SiLU, per-token unit-norm
// q/k per head, per-token learning rates, schedule execution against private
// fast-weight copies, per-head RMSNorm, concat, output projection.
template <class Scalar>
Mat<Scalar> layer_forward(const LayerParams<Scalar>& params, const LayerConfig& cfg,
                          const Mat<Scalar>& x, const ChunkSchedule& sched,
                          LayerTrace<Scalar>* trace = nullptr) {
  cfg.validate();
  require_dims(x.cols() == cfg.d, "layer_forward: input width != model dim");
  require_dims(x.rows() == sched.seq_len, "layer_forward: schedule/sequence length mismatch");
  require_finite(x, "layer_forward input");

  const Index L = x.rows();
  const Index hd = cfg.head_dim();

  const Mat<Scalar> qkv = silu(Mat<Scalar>(x * params.qkv_proj));  // [L, 3d]
  const Mat<Scalar> q = qkv.middleCols(0, cfg.d);
  const Mat<Scalar> k = qkv.middleCols(cfg.d, cfg.d);
  const Mat<Scalar> v = qkv.middleCols(2 * cfg.d, cfg.d);
  const Mat<Scalar> lr =
      softplus(Mat<Scalar>((x * params.lr_proj).array() + Scalar(cfg.const_lr_bias)));

  Vec<Scalar> beta;
  const bool needs_beta = cfg.rule != UpdateRule::kGd;
  if (needs_beta) {
    beta = Vec<Scalar>(x * params.beta_proj).unaryExpr([](Scalar s) { return sigmoid(s); });
  }

  Mat<Scalar> concat(L, cfg.d);
  if (trace) trace->head_outputs.clear();
  for (Index h = 0; h < cfg.nh; ++h) {
    ChunkTokens<Scalar> t = detail::head_tokens<Scalar>(q, k, v, lr, h, hd, /*silu_norm_qk=*/false);
    FastWeight<Scalar> fw = params.fw0[static_cast<size_t>(h)];  // private copy per call
    OptimizerState<Scalar> st;
    st.rule = cfg.rule;
    st.ns_iters = cfg.ns_iters;
    st.norm_mode = cfg.norm_mode;
    Mat<Scalar> o = run_schedule(fw, st, t, sched, needs_beta ? &beta : nullptr);
    o = rms_norm_rows(o);
    if (trace) trace->head_outputs.push_back(o);
    concat.middleCols(h * hd, hd) = o;
  }
  return concat * params.out_proj;
}

// In-layer hybrid: shared qkv (no SiLU at the projection), a windowed
// attention branch on per-channel rescaled q/k, and the recurrent branch on
// SiLU'd unit-norm q/k. Branch outputs are summed, the recurrent one gated by
// a per-head SiLU projection, then projected out.
template <class Scalar>
Mat<Scalar> hybrid_forward(const LayerParams<Scalar>& params, const LayerConfig& cfg,
                           const Mat<Scalar>& x, const ChunkSchedule& sched,
                           LayerTrace<Scalar>* trace = nullptr) {
  cfg.validate();
  require_dims(x.cols() == cfg.d, "hybrid_forward: input width != model dim");
  require_dims(x.rows() == sched.seq_len, "hybrid_forward: schedule/sequence length mismatch");
  require_finite(x, "hybrid_forward input");

  if (cfg.window.kind == WindowKind::kSlidingCausal) {
    const bool shifted = !sched.ops.empty() &&
                         std::all_of(sched.ops.begin(), sched.ops.end(), [](const ChunkOp& op) {
                           return op.mode == ChunkMode::kApplyThenUpdate;
                         });
    Index max_chunk = 0;
    for (const ChunkOp& op : sched.ops) max_chunk = std::max(max_chunk, op.end - op.begin);
    if (shifted && cfg.window.window < max_chunk) {
      throw ConfigError("hybrid_forward: sliding window smaller than chunk leaves causality holes");
    }
  }

  const Index L = x.rows();
  const Index hd = cfg.head_dim();

  const Mat<Scalar> qkv = x * params.qkv_proj;
  const Mat<Scalar> q = qkv.middleCols(0, cfg.d);
  const Mat<Scalar> k = qkv.middleCols(cfg.d, cfg.d);
  const Mat<Scalar> v = qkv.middleCols(2 * cfg.d, cfg.d);

  // Attention branch.
  const Mat<Scalar> attn_q =
      ((q.array().rowwise() * params.q_scale.transpose().array()).rowwise() +
       params.q_shift.transpose().array())
          .matrix();
  const Mat<Scalar> attn_k =
      ((k.array().rowwise() * params.k_scale.transpose().array()).rowwise() +
       params.k_shift.transpose().array())
          .matrix();
  const Mat<Scalar> attn_o = multi_head_window_attention(attn_q, attn_k, v, cfg.nh, cfg.window);

  // Recurrent branch.
  const Mat<Scalar> lr =
      softplus(Mat<Scalar>((x * params.lr_proj).array() + Scalar(cfg.const_lr_bias)));
  Vec<Scalar> beta;
  const bool needs_beta = cfg.rule != UpdateRule::kGd;
  if (needs_beta) {
    beta = Vec<Scalar>(x * params.beta_proj).unaryExpr([](Scalar s) { return sigmoid(s); });
  }
  const Mat<Scalar> gate = silu(Mat<Scalar>(x * params.ttt_scale_proj));  // [L, nh]

  Mat<Scalar> rec(L, cfg.d);
  if (trace) trace->head_outputs.clear();
  for (Index h = 0; h < cfg.nh; ++h) {
    ChunkTokens<Scalar> t = detail::head_tokens<Scalar>(q, k, v, lr, h, hd, /*silu_norm_qk=*/true);
    FastWeight<Scalar> fw = params.fw0[static_cast<size_t>(h)];
    OptimizerState<Scalar> st;
    st.rule = cfg.rule;
    st.ns_iters = cfg.ns_iters;
    st.norm_mode = cfg.norm_mode;
    Mat<Scalar> o = run_schedule(fw, st, t, sched, needs_beta ? &beta : nullptr);
    o = rms_norm_rows(o);
    o = (o.array().colwise() * gate.col(h).array()).matrix();
    if (trace) trace->head_outputs.push_back(o);
    rec.middleCols(h * hd, hd) = o;
  }

  return (attn_o + rec) * params.out_proj;
}

}  // namespace ttt
