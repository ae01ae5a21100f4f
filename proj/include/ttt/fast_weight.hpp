#pragma once

#include <cmath>

#include "ttt/core.hpp"
#include "ttt/random.hpp"
#include "ttt/types.hpp"

namespace ttt {

// SwiGLU fast-weight triple. Row-vector convention: tokens are rows, so
// w1, w3 map d -> dh and w2 maps dh -> d.
//   f(x) = [silu(x w1) .* (x w3)] w2
template <class Scalar>
struct FastWeight {
  Mat<Scalar> w1;  // [d, dh]
  Mat<Scalar> w2;  // [dh, d]
  Mat<Scalar> w3;  // [d, dh]

  Index in_dim() const { return w1.rows(); }
  Index hidden_dim() const { return w1.cols(); }

  bool shapes_consistent() const {
    return w1.rows() == w3.rows() && w1.cols() == w3.cols() && w2.rows() == w1.cols() &&
           w2.cols() == w1.rows();
  }
};

// Gaussian init, std 1/sqrt(fan-in). Fan-in of w1/w3 is the input dim, of w2 the hidden dim.
template <class Scalar>
FastWeight<Scalar> init_fast_weight(Index d, Index dh, std::mt19937_64& rng) {
  FastWeight<Scalar> fw;
  fw.w1 = gaussian_mat<Scalar>(rng, d, dh, Scalar(1) / std::sqrt(Scalar(d)));
  fw.w2 = gaussian_mat<Scalar>(rng, dh, d, Scalar(1) / std::sqrt(Scalar(dh)));
  fw.w3 = gaussian_mat<Scalar>(rng, d, dh, Scalar(1) / std::sqrt(Scalar(d)));
  return fw;
}

// One chunk of per-head tokens. lr columns are (lr1, lr2, lr3), already softplus'd.
template <class Scalar>
struct ChunkTokens {
  Mat<Scalar> q;   // [l, d]
  Mat<Scalar> k;   // [l, d]
  Mat<Scalar> v;   // [l, d]
  Mat<Scalar> lr;  // [l, 3]
};

template <class Scalar>
void validate_tokens(const ChunkTokens<Scalar>& t) {
  require_dims(t.k.rows() >= 1, "tokens: empty chunk");
  require_dims(t.q.cols() == t.k.cols() && t.k.cols() == t.v.cols(), "tokens: q/k/v width disagrees");
  require_dims(t.q.rows() == t.k.rows() && t.k.rows() == t.v.rows() && t.lr.rows() == t.k.rows(),
               "tokens: q/k/v/lr length disagrees");
  require_dims(t.lr.cols() == 3, "tokens: lr must have 3 columns");
  if ((t.lr.array() < Scalar(0)).any()) throw NumericError("tokens: negative learning rate");
}

// f(q) for every row of q. Pure; fw is untouched.
template <class Scalar>
Mat<Scalar> apply_fw(const FastWeight<Scalar>& fw, const Mat<Scalar>& q) {
  require_dims(q.cols() == fw.w1.rows(), "apply_fw: token width != fast-weight input dim");
  const Mat<Scalar> gate = q * fw.w1;
  const Mat<Scalar> ungated = q * fw.w3;
  const Mat<Scalar> hidden = silu(gate).cwiseProduct(ungated);
  return hidden * fw.w2;
}

// Unweighted dot-product loss: sum_i -f(k_i)^T v_i.
template <class Scalar>
Scalar fw_loss(const FastWeight<Scalar>& fw, const Mat<Scalar>& k, const Mat<Scalar>& v) {
  require_dims(k.rows() == v.rows() && k.cols() == v.cols(), "fw_loss: k/v shape mismatch");
  return -apply_fw(fw, k).cwiseProduct(v).sum();
}

template <class Scalar>
struct FwGrads {
  Mat<Scalar> g1, g2, g3;
};

// Analytic gradient of the lr-weighted dot-product loss over one chunk.
// Two matmuls forward with keys, four backward. Each matrix takes its own lr
// column: lr1 -> w1, lr2 -> w2, lr3 -> w3. The loss's leading minus is folded
// into the gradients, so callers subtract them.
template <class Scalar>
FwGrads<Scalar> chunk_gradient(const FastWeight<Scalar>& fw, const Mat<Scalar>& k,
                               const Mat<Scalar>& v, const Mat<Scalar>& lr) {
  require_dims(k.cols() == fw.w1.rows(), "chunk_gradient: key width != fast-weight input dim");
  require_dims(v.cols() == fw.w2.cols(), "chunk_gradient: value width != fast-weight output dim");
  require_dims(k.rows() == v.rows() && lr.rows() == k.rows() && lr.cols() == 3,
               "chunk_gradient: token/lr shape mismatch");

  // Forward with keys.
  const Mat<Scalar> gate = k * fw.w1;          // [l, dh]
  const Mat<Scalar> ungated = k * fw.w3;       // [l, dh]
  const Mat<Scalar> hidden = silu(gate).cwiseProduct(ungated);

  // Backward.
  const Mat<Scalar> dhidden = v * fw.w2.transpose();            // [l, dh]
  const Mat<Scalar> dungated = dhidden.cwiseProduct(silu(gate));
  const Mat<Scalar> dgate = dhidden.cwiseProduct(ungated);
  const Mat<Scalar> dgate_pre = silu_backprop(dgate, gate);

  const auto scale_rows = [](const Mat<Scalar>& m, const auto& w) -> Mat<Scalar> {
    return (m.array().colwise() * w.array()).matrix();
  };

  FwGrads<Scalar> g;
  g.g2 = -(hidden.transpose() * scale_rows(v, Vec<Scalar>(lr.col(1))));        // [dh, d]
  g.g1 = -(scale_rows(k, Vec<Scalar>(lr.col(0))).transpose() * dgate_pre);     // [d, dh]
  g.g3 = -(scale_rows(k, Vec<Scalar>(lr.col(2))).transpose() * dungated);      // [d, dh]

  require_finite(g.g1, "chunk_gradient g1");
  require_finite(g.g2, "chunk_gradient g2");
  require_finite(g.g3, "chunk_gradient g3");
  return g;
}

template <class Scalar>
FwGrads<Scalar> chunk_gradient(const FastWeight<Scalar>& fw, const ChunkTokens<Scalar>& t) {
  return chunk_gradient(fw, t.k, t.v, t.lr);
}

}  // namespace ttt
