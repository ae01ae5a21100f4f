#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "ttt/fast_weight.hpp"
#include "ttt/optim.hpp"
#include "ttt/random.hpp"
#include "ttt/types.hpp"

namespace ttt {

// Ideal compute-to-memory ratio of an [h x h] weight against a [b x h] chunk:
// 2 h^2 b FLOPs over 2h^2 + 4hb bytes (weight + activation in, activation
// out, 2 bytes per element). Bounded by min(h/2, b).
inline double compute_memory_ratio(std::uint64_t h, std::uint64_t b) {
  const double hh = static_cast<double>(h);
  const double bb = static_cast<double>(b);
  return 2.0 * hh * hh * bb / (2.0 * hh * hh + 4.0 * hh * bb);
}

// Fast-weight reals per layer: three hd x (hd*r) matrices per head.
inline std::uint64_t state_size(std::uint64_t d, std::uint64_t nh, std::uint64_t r) {
  if (nh == 0 || d % nh != 0) throw ConfigError("state_size: head count must divide model dim");
  const std::uint64_t hd = d / nh;
  return 3ull * nh * hd * (hd * r);
}

// Update+apply FLOPs for n tokens: 2 matmuls forward with keys, 4 backward,
// 3 forward with queries, each 2*n*hd*(hd*r) per head. Equals
// 18 n (d^2/nh) r = 6n * state_size.
inline std::uint64_t ttt_flops(std::uint64_t n, std::uint64_t d, std::uint64_t nh, std::uint64_t r) {
  return 6ull * n * state_size(d, nh, r);
}

// Newton-Schulz cost: three matmuls per iteration per matrix,
// hd^3 (4r + 2) FLOPs, summed over heads and iterations.
inline std::uint64_t muon_flops(std::uint64_t nh, std::uint64_t hd, std::uint64_t r,
                                std::uint64_t iters) {
  return iters * nh * hd * hd * hd * (4ull * r + 2ull);
}

// Bytes moved by the 9 update+apply matmuls under the 2-bytes-per-element
// accounting: each [b x p][p x q] product reads the weight (2pq) and the
// activation (2bp) and writes 2bq.
inline std::uint64_t ttt_bytes(std::uint64_t n, std::uint64_t d, std::uint64_t nh, std::uint64_t r,
                               std::uint64_t b) {
  if (b == 0 || n % b != 0) throw ConfigError("ttt_bytes: token count must be a whole number of chunks");
  const std::uint64_t hd = d / nh;
  const std::uint64_t inter = hd * r;
  const auto matmul_bytes = [b](std::uint64_t p, std::uint64_t q) {
    return 2ull * (p * q + b * p + b * q);
  };
  // Forward with keys: k*w1, k*w3. Backward: v*w2^T plus the three gradient
  // products. Forward with queries: q*w1, q*w3, hidden*w2.
  const std::uint64_t per_chunk_per_head =
      2ull * matmul_bytes(hd, inter)        // key forward
      + matmul_bytes(hd, inter)             // dhidden
      + 3ull * matmul_bytes(hd, inter)      // gradient products (same operand volume)
      + 2ull * matmul_bytes(hd, inter)      // query forward
      + matmul_bytes(inter, hd);            // query output
  return (n / b) * nh * per_chunk_per_head;
}

struct PerfPoint {
  std::uint64_t chunk = 0;
  std::uint64_t hidden = 0;
  std::uint64_t flops = 0;
  std::uint64_t bytes = 0;
  double ratio = 0.0;
  double measured_gflops = 0.0;
};

struct BenchConfig {
  Index hidden = 512;  // head dim of the benched fast weight
  Index nh = 1;
  Index r = 1;
  int measurements = 5;       // median-of-N timing
  double min_time_s = 0.05;   // repeat batching threshold for coarse timers
  std::uint64_t seed = 7;
};

// Times update+apply over one chunk per iteration (GD rule) and meters it
// with ttt_flops. Warmup iterations are excluded; iterations are batched
// until each measurement exceeds min_time_s.
template <class Scalar>
std::vector<PerfPoint> throughput_bench(const BenchConfig& cfg,
                                        const std::vector<Index>& chunk_sizes) {
  if (chunk_sizes.empty()) throw ConfigError("bench: no chunk sizes");
  for (size_t i = 1; i < chunk_sizes.size(); ++i) {
    if (chunk_sizes[i] <= chunk_sizes[i - 1]) throw ConfigError("bench: chunk sizes must ascend");
  }

  using Clock = std::chrono::steady_clock;
  std::vector<PerfPoint> points;
  for (const Index b : chunk_sizes) {
    auto rng = make_rng(cfg.seed, static_cast<std::uint64_t>(b));
    const Index d = cfg.hidden * cfg.nh;
    FastWeight<Scalar> fw = init_fast_weight<Scalar>(cfg.hidden, cfg.hidden * cfg.r, rng);
    const Mat<Scalar> k = gaussian_mat<Scalar>(rng, b, cfg.hidden, Scalar(1));
    const Mat<Scalar> v = gaussian_mat<Scalar>(rng, b, cfg.hidden, Scalar(1));
    const Mat<Scalar> q = gaussian_mat<Scalar>(rng, b, cfg.hidden, Scalar(1));
    const Mat<Scalar> lr = Mat<Scalar>::Constant(b, 3, Scalar(0.01));

    volatile Scalar sink = 0;
    OptimizerState<Scalar> st;
    const auto step = [&]() {
      update_fast_weight(fw, chunk_gradient(fw, k, v, lr), st, Scalar(0));
      sink = sink + apply_fw(fw, q)(0, 0);
    };

    step();  // warmup
    int iters_per_measure = 1;
    {
      const auto t0 = Clock::now();
      step();
      const double t = std::chrono::duration<double>(Clock::now() - t0).count();
      if (t < cfg.min_time_s) {
        iters_per_measure = static_cast<int>(cfg.min_time_s / std::max(t, 1e-9)) + 1;
      }
    }

    const std::uint64_t flops_per_iter =
        ttt_flops(static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(d),
                  static_cast<std::uint64_t>(cfg.nh), static_cast<std::uint64_t>(cfg.r));
    std::vector<double> rates;
    for (int m = 0; m < cfg.measurements; ++m) {
      const auto t0 = Clock::now();
      for (int it = 0; it < iters_per_measure; ++it) step();
      const double t = std::chrono::duration<double>(Clock::now() - t0).count();
      rates.push_back(static_cast<double>(flops_per_iter) * iters_per_measure / t / 1e9);
    }
    std::nth_element(rates.begin(), rates.begin() + rates.size() / 2, rates.end());

    PerfPoint pt;
    pt.chunk = static_cast<std::uint64_t>(b);
    pt.hidden = static_cast<std::uint64_t>(cfg.hidden);
    pt.flops = flops_per_iter;
    pt.bytes = ttt_bytes(static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(d),
                         static_cast<std::uint64_t>(cfg.nh), static_cast<std::uint64_t>(cfg.r),
                         static_cast<std::uint64_t>(b));
    pt.ratio = static_cast<double>(pt.flops) / static_cast<double>(pt.bytes);
    pt.measured_gflops = rates[rates.size() / 2];
    points.push_back(pt);
  }
  return points;
}

// CSV schema: chunk,hidden,flops,bytes,ratio,measured_gflops,utilization_fraction.
// Utilization is relative to the best measured rate in the sweep.
std::string perf_points_csv(const std::vector<PerfPoint>& points);

}  // namespace ttt
