#pragma once

#include <optional>

#include "ttt/fast_weight.hpp"
#include "ttt/types.hpp"

namespace ttt {

enum class UpdateRule { kGd, kMomentum, kMuon };

// L2-rescale target for the updated weight: keep each input-dimension slice at
// its pre-update norm (pseudocode convention), or force it to unit norm.
enum class NormMode { kPreserve, kUnit };

// Quintic Newton-Schulz coefficients.
struct MuonConstants {
  static constexpr double a = 3.4445;
  static constexpr double b = -4.7750;
  static constexpr double c = 2.0315;
};

inline constexpr int kDefaultNsIters = 5;

// Newton-Schulz orthogonalization: normalize by the Frobenius norm, then
// iterate X <- aX + b(XX^T)X + c(XX^T)^2 X. Maps singular values toward 1
// while keeping singular vectors. A (near-)zero input short-circuits to zero;
// otherwise the normalization divides by the exact Frobenius norm so the
// result is invariant to positive rescaling of g.
template <class Scalar>
Mat<Scalar> muon_orthogonalize(const Mat<Scalar>& g, int iters = kDefaultNsIters,
                               Scalar eps = default_eps<Scalar>()) {
  const Scalar fro = g.norm();
  if (!(fro > eps)) return Mat<Scalar>::Zero(g.rows(), g.cols());

  Mat<Scalar> x = g / fro;
  const Scalar a = Scalar(MuonConstants::a);
  const Scalar b = Scalar(MuonConstants::b);
  const Scalar c = Scalar(MuonConstants::c);
  for (int it = 0; it < iters; ++it) {
    const Mat<Scalar> gram = x * x.transpose();
    const Mat<Scalar> gx = gram * x;
    x = a * x + b * gx + c * (gram * gx);
  }
  return x;
}

// w' = w - g, then each column (the slice over the input dimension) rescaled.
// kPreserve restores the column norm of the original w; kUnit forces norm 1.
// Columns of w - g with norm < eps fall back to the original column.
template <class Scalar>
Mat<Scalar> weight_update_gd(const Mat<Scalar>& w, const Mat<Scalar>& g,
                             Scalar eps = default_eps<Scalar>(),
                             NormMode mode = NormMode::kPreserve) {
  require_dims(w.rows() == g.rows() && w.cols() == g.cols(), "weight_update: shape mismatch");
  Mat<Scalar> out = w - g;
  for (Index j = 0; j < w.cols(); ++j) {
    const Scalar n = out.col(j).norm();
    if (n < eps) {
      out.col(j) = w.col(j);
      continue;
    }
    const Scalar target = mode == NormMode::kPreserve ? w.col(j).norm() : Scalar(1);
    out.col(j) *= target / n;
  }
  return out;
}

template <class Scalar>
void accumulate_momentum(const Mat<Scalar>& g, std::optional<Mat<Scalar>>& m, Scalar beta_mean) {
  if (beta_mean < Scalar(0) || beta_mean > Scalar(1)) {
    throw ConfigError("momentum coefficient outside [0, 1]");
  }
  if (!m) m = Mat<Scalar>::Zero(g.rows(), g.cols());
  require_dims(m->rows() == g.rows() && m->cols() == g.cols(), "momentum buffer shape mismatch");
  *m = beta_mean * (*m) + g;
}

// M' = beta_mean * M + g; weight stepped by M'. A missing buffer starts at zero.
template <class Scalar>
Mat<Scalar> weight_update_momentum(const Mat<Scalar>& w, const Mat<Scalar>& g,
                                   std::optional<Mat<Scalar>>& m, Scalar beta_mean,
                                   Scalar eps = default_eps<Scalar>(),
                                   NormMode mode = NormMode::kPreserve) {
  accumulate_momentum(g, m, beta_mean);
  return weight_update_gd(w, *m, eps, mode);
}

// M' = beta_mean * M + g; weight stepped by the orthogonalized M'.
template <class Scalar>
Mat<Scalar> weight_update_muon(const Mat<Scalar>& w, const Mat<Scalar>& g,
                               std::optional<Mat<Scalar>>& m, Scalar beta_mean,
                               int ns_iters = kDefaultNsIters, Scalar eps = default_eps<Scalar>(),
                               NormMode mode = NormMode::kPreserve) {
  accumulate_momentum(g, m, beta_mean);
  return weight_update_gd(w, muon_orthogonalize(*m, ns_iters, eps), eps, mode);
}

// Per-fast-weight optimizer state: one momentum buffer per matrix.
template <class Scalar>
struct OptimizerState {
  std::optional<Mat<Scalar>> m1, m2, m3;
  UpdateRule rule = UpdateRule::kGd;
  int ns_iters = kDefaultNsIters;
  NormMode norm_mode = NormMode::kPreserve;
};

// Applies the configured rule to the three matrices independently.
template <class Scalar>
void update_fast_weight(FastWeight<Scalar>& fw, const FwGrads<Scalar>& g,
                        OptimizerState<Scalar>& st, Scalar beta_mean,
                        Scalar eps = default_eps<Scalar>()) {
  switch (st.rule) {
    case UpdateRule::kGd:
      fw.w1 = weight_update_gd(fw.w1, g.g1, eps, st.norm_mode);
      fw.w2 = weight_update_gd(fw.w2, g.g2, eps, st.norm_mode);
      fw.w3 = weight_update_gd(fw.w3, g.g3, eps, st.norm_mode);
      break;
    case UpdateRule::kMomentum:
      fw.w1 = weight_update_momentum(fw.w1, g.g1, st.m1, beta_mean, eps, st.norm_mode);
      fw.w2 = weight_update_momentum(fw.w2, g.g2, st.m2, beta_mean, eps, st.norm_mode);
      fw.w3 = weight_update_momentum(fw.w3, g.g3, st.m3, beta_mean, eps, st.norm_mode);
      break;
    case UpdateRule::kMuon:
      fw.w1 = weight_update_muon(fw.w1, g.g1, st.m1, beta_mean, st.ns_iters, eps, st.norm_mode);
      fw.w2 = weight_update_muon(fw.w2, g.g2, st.m2, beta_mean, st.ns_iters, eps, st.norm_mode);
      fw.w3 = weight_update_muon(fw.w3, g.g3, st.m3, beta_mean, st.ns_iters, eps, st.norm_mode);
      break;
  }
}

}  // namespace ttt
