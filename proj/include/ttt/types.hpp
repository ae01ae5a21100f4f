#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace ttt {

using Index = Eigen::Index;

// Row-major dense matrix, the carrier for every 2-D tensor (q, k, v, weights).
template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Stack of same-shape matrices (heads or batch entries).
template <class Scalar>
using BatchMat = std::vector<Mat<Scalar>>;

template <class Scalar>
bool same_shape(const BatchMat<Scalar>& batch) {
  for (const auto& m : batch) {
    if (m.rows() != batch.front().rows() || m.cols() != batch.front().cols()) return false;
  }
  return true;
}

// Norm-guard thresholds per precision.
template <class Scalar>
constexpr Scalar default_eps();
template <>
constexpr float default_eps<float>() {
  return 1e-6f;
}
template <>
constexpr double default_eps<double>() {
  return 1e-12;
}

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

template <class Scalar>
void require_finite(const Mat<Scalar>& m, const std::string& what) {
  if (!m.allFinite()) throw NumericError("non-finite values in " + what);
}

enum class Precision { kSingle, kDouble };

}  // namespace ttt
