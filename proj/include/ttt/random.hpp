#pragma once

#include <cstdint>
#include <random>

#include "ttt/types.hpp"

namespace ttt {

// splitmix64; used to decorrelate (seed, stream) pairs before seeding the engine.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(mix64(mix64(seed) ^ mix64(stream)));
}

template <class Scalar>
Mat<Scalar> gaussian_mat(std::mt19937_64& rng, Index rows, Index cols, Scalar stddev) {
  std::normal_distribution<Scalar> dist(Scalar(0), stddev);
  Mat<Scalar> m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

template <class Scalar>
Vec<Scalar> gaussian_vec(std::mt19937_64& rng, Index n, Scalar stddev) {
  std::normal_distribution<Scalar> dist(Scalar(0), stddev);
  Vec<Scalar> v(n);
  for (Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

// Gaussian rows rescaled to unit L2 norm (key/value distribution of the recall task).
template <class Scalar>
Mat<Scalar> unit_gaussian_rows(std::mt19937_64& rng, Index rows, Index cols) {
  Mat<Scalar> m = gaussian_mat<Scalar>(rng, rows, cols, Scalar(1));
  for (Index i = 0; i < rows; ++i) {
    Scalar n = m.row(i).norm();
    if (n > default_eps<Scalar>()) m.row(i) /= n;
  }
  return m;
}

}  // namespace ttt
