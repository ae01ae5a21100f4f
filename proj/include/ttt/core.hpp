#pragma once

#include <cmath>

#include "ttt/types.hpp"

namespace ttt {

template <class Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <class Scalar>
Scalar silu(Scalar x) {
  return x * sigmoid(x);
}

// d/dx silu(x) contracted against an upstream gradient dy.
template <class Scalar>
Scalar silu_backprop(Scalar dy, Scalar x) {
  const Scalar s = sigmoid(x);
  return dy * s * (Scalar(1) + x * (Scalar(1) - s));
}

// ln(1 + e^x), stable for large |x|.
template <class Scalar>
Scalar softplus(Scalar x) {
  if (x > Scalar(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Value y > 0 such that softplus(softplus_inverse(y)) == y.
template <class Scalar>
Scalar softplus_inverse(Scalar y) {
  // log(e^y - 1) = y + log(1 - e^-y)
  return y + std::log(-std::expm1(-y));
}

template <class Scalar>
Mat<Scalar> silu(const Mat<Scalar>& x) {
  return x.unaryExpr([](Scalar v) { return silu(v); });
}

template <class Scalar>
Mat<Scalar> silu_backprop(const Mat<Scalar>& dy, const Mat<Scalar>& x) {
  require_dims(dy.rows() == x.rows() && dy.cols() == x.cols(), "silu_backprop: shape mismatch");
  return dy.binaryExpr(x, [](Scalar d, Scalar v) { return silu_backprop(d, v); });
}

template <class Scalar>
Mat<Scalar> softplus(const Mat<Scalar>& x) {
  return x.unaryExpr([](Scalar v) { return softplus(v); });
}

template <class Scalar>
Mat<Scalar> sigmoid(const Mat<Scalar>& x) {
  return x.unaryExpr([](Scalar v) { return sigmoid(v); });
}

// Checked dense product. Single-threaded evaluation keeps repeated runs bit-identical.
template <class Scalar>
Mat<Scalar> matmul(const Mat<Scalar>& a, const Mat<Scalar>& b) {
  require_dims(a.cols() == b.rows(), "matmul: inner dimensions disagree");
  return a * b;
}

// Each row rescaled to unit L2 norm; rows with norm < eps pass through unchanged.
template <class Scalar>
Mat<Scalar> l2_normalize_rows(const Mat<Scalar>& m, Scalar eps = default_eps<Scalar>()) {
  Mat<Scalar> out = m;
  for (Index i = 0; i < m.rows(); ++i) {
    const Scalar n = m.row(i).norm();
    if (n >= eps) out.row(i) /= n;
  }
  return out;
}

// v / sqrt(mean(v^2) + eps); gain-free.
template <class Scalar>
Vec<Scalar> rms_norm(const Vec<Scalar>& v, Scalar eps = default_eps<Scalar>()) {
  const Scalar ms = v.squaredNorm() / Scalar(v.size());
  return v / std::sqrt(ms + eps);
}

template <class Scalar>
Mat<Scalar> rms_norm_rows(const Mat<Scalar>& m, Scalar eps = default_eps<Scalar>()) {
  Mat<Scalar> out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    const Scalar ms = m.row(i).squaredNorm() / Scalar(m.cols());
    out.row(i) = m.row(i) / std::sqrt(ms + eps);
  }
  return out;
}

}  // namespace ttt
