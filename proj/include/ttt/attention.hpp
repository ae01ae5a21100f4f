#pragma once

#include <cmath>

#include "ttt/types.hpp"

namespace ttt {

enum class WindowKind { kSlidingCausal, kBlockBidirectional };

struct WindowSpec {
  WindowKind kind = WindowKind::kSlidingCausal;
  Index window = 1;  // token count (sliding) or block length (block kind)
};

// Token-level attendance mask for a window spec: (i, j) true iff token i may
// attend to token j.
inline BoolMat attention_mask(const WindowSpec& spec, Index seq_len) {
  if (spec.window < 1) throw ConfigError("attention: window must be >= 1");
  BoolMat mask = BoolMat::Constant(seq_len, seq_len, false);
  for (Index i = 0; i < seq_len; ++i) {
    if (spec.kind == WindowKind::kSlidingCausal) {
      for (Index j = std::max<Index>(0, i - spec.window + 1); j <= i; ++j) mask(i, j) = true;
    } else {
      const Index b = (i / spec.window) * spec.window;
      const Index e = std::min(b + spec.window, seq_len);
      for (Index j = b; j < e; ++j) mask(i, j) = true;
    }
  }
  return mask;
}

namespace detail {

// Row-max-subtracted softmax attention restricted to columns [lo, hi) of the
// score row.
template <class Scalar>
void attend_row(const Mat<Scalar>& q, const Mat<Scalar>& k, const Mat<Scalar>& v, Index i,
                Index lo, Index hi, Scalar scale, Mat<Scalar>& out) {
  Vec<Scalar> scores(hi - lo);
  for (Index j = lo; j < hi; ++j) scores(j - lo) = scale * q.row(i).dot(k.row(j));
  const Scalar m = scores.maxCoeff();
  Vec<Scalar> w = (scores.array() - m).exp();
  w /= w.sum();
  out.row(i).setZero();
  for (Index j = lo; j < hi; ++j) out.row(i) += w(j - lo) * v.row(j);
}

}  // namespace detail

// Single-head windowed softmax attention, scale 1/sqrt(head dim).
// Sliding causal: token i attends to (i - window, i]. Block bidirectional:
// token i attends to every token in its own block of length `window`.
template <class Scalar>
Mat<Scalar> window_attention(const Mat<Scalar>& q, const Mat<Scalar>& k, const Mat<Scalar>& v,
                             const WindowSpec& spec) {
  require_dims(q.rows() == k.rows() && k.rows() == v.rows(), "attention: sequence lengths disagree");
  require_dims(q.cols() == k.cols(), "attention: q/k head dims disagree");
  if (spec.window < 1) throw ConfigError("attention: window must be >= 1");

  const Index l = q.rows();
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(q.cols()));
  Mat<Scalar> out(l, v.cols());
  for (Index i = 0; i < l; ++i) {
    Index lo, hi;
    if (spec.kind == WindowKind::kSlidingCausal) {
      lo = std::max<Index>(0, i - spec.window + 1);
      hi = i + 1;
    } else {
      lo = (i / spec.window) * spec.window;
      hi = std::min(lo + spec.window, l);
    }
    detail::attend_row(q, k, v, i, lo, hi, scale, out);
  }
  return out;
}

// Direct O(l^2) reference: full causal or full bidirectional attention.
template <class Scalar>
Mat<Scalar> full_attention_oracle(const Mat<Scalar>& q, const Mat<Scalar>& k, const Mat<Scalar>& v,
                                  bool causal) {
  require_dims(q.rows() == k.rows() && k.rows() == v.rows(), "attention: sequence lengths disagree");
  require_dims(q.cols() == k.cols(), "attention: q/k head dims disagree");
  const Index l = q.rows();
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(q.cols()));
  Mat<Scalar> out(l, v.cols());
  for (Index i = 0; i < l; ++i) {
    detail::attend_row(q, k, v, i, Index(0), causal ? i + 1 : l, scale, out);
  }
  return out;
}

// Heads are contiguous column groups of width d/nh, attended independently and
// concatenated back.
template <class Scalar>
Mat<Scalar> multi_head_window_attention(const Mat<Scalar>& q, const Mat<Scalar>& k,
                                        const Mat<Scalar>& v, Index nh, const WindowSpec& spec) {
  require_dims(nh >= 1 && q.cols() % nh == 0, "attention: head count must divide width");
  const Index hd = q.cols() / nh;
  Mat<Scalar> out(q.rows(), q.cols());
  for (Index h = 0; h < nh; ++h) {
    out.middleCols(h * hd, hd) = window_attention<Scalar>(
        q.middleCols(h * hd, hd), k.middleCols(h * hd, hd), v.middleCols(h * hd, hd), spec);
  }
  return out;
}

}  // namespace ttt
