// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances and runtime budgets are pinned in code.

#include <Eigen/Core>
#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

// doctest's to_string prints six decimals; deviations here live at 1e-17.

#include "layer_ref.hpp"
#include "oracles.hpp"
#include "ttt/checks.hpp"
#include "ttt/layer.hpp"
#include "ttt/parallel.hpp"
#include "ttt/perf_model.hpp"
#include "ttt/recall.hpp"

using namespace ttt;
using Md = Mat<double>;
using Vd = Vec<double>;

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

int g_failures = 0;

struct Criterion {
  int id;
  const char* name;
  double runtime_budget_s;
};

void report(const Criterion& c, bool pass, double elapsed_s, const std::string& detail) {
  const bool in_budget = elapsed_s < c.runtime_budget_s;
  const bool ok = pass && in_budget;
  if (!ok) ++g_failures;
  std::printf("[%s] criterion %2d: %-28s %6.2fs  %s%s\n", ok ? "PASS" : "FAIL", c.id, c.name,
              elapsed_s, detail.c_str(), in_budget ? "" : "  (over runtime budget)");
}

template <class F>
void run(const Criterion& c, F body) {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    pass = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(c, pass, dt, detail);
}

// 1. chunk_gradient vs central differences of the eta-weighted loss, with the
// finite-difference side evaluated through a scalar-loop forward.
bool crit_gradient(std::string& detail) {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto rng = make_rng(seed, 61);
    FastWeight<double> fw = init_fast_weight<double>(6, 8, rng);
    const Md k = gaussian_mat<double>(rng, 5, 6, 1.0);
    const Md v = gaussian_mat<double>(rng, 5, 6, 1.0);
    const Md lr = gaussian_mat<double>(rng, 5, 3, 1.0).cwiseAbs();
    const FwGrads<double> g = chunk_gradient(fw, k, v, lr);
    worst = std::max(worst, oracle::max_rel_err(g.g1, oracle::fd_gradient(fw, k, v, lr, 0)));
    worst = std::max(worst, oracle::max_rel_err(g.g2, oracle::fd_gradient(fw, k, v, lr, 1)));
    worst = std::max(worst, oracle::max_rel_err(g.g3, oracle::fd_gradient(fw, k, v, lr, 2)));
  }
  detail = "max rel err " + sci(worst) + " over 20 seeds (tol 1e-5)";
  return worst < 1e-5;
}

// 2. chunk = 1 GD layer against the independent per-token recurrence.
bool crit_per_token(std::string& detail) {
  const LayerConfig cfg = make_layer_config(8, 2, 2, 1, UpdateRule::kGd, 0.01);
  const auto params = init_layer_params<double>(cfg, 11);
  auto rng = make_rng(12, 1234);
  const Md x = gaussian_mat<double>(rng, 8, 8, 1.0);
  const Md got = layer_forward(params, cfg, x, blockwise_causal(8, 1));
  const Md want = layer_ref::forward(params, cfg, x);
  const double dev = (got - want).cwiseAbs().maxCoeff();
  detail = "max abs dev " + sci(dev) + " (tol 1e-9)";
  return dev < 1e-9;
}

// 3. Sharded chunk updates against the unsharded fast weight.
bool crit_cp(std::string& detail) {
  double worst = 0.0;
  for (UpdateRule rule : {UpdateRule::kGd, UpdateRule::kMomentum, UpdateRule::kMuon}) {
    const ParallelCheckResult res = run_parallel_check(3, rule);
    for (const auto& c : res.cp) worst = std::max(worst, c.max_rel_dev);
  }
  detail = "max rel dev " + sci(worst) + " over 1/2/4/7 shards x 3 rules (tol 1e-10)";
  return worst <= 1e-10;
}

// 4. Head-sharded forward against the single-device forward.
bool crit_tp(std::string& detail) {
  double worst = 0.0;
  const ParallelCheckResult res = run_parallel_check(4, UpdateRule::kMuon);
  for (const auto& c : res.tp) worst = std::max(worst, c.max_rel_dev);
  detail = "max abs dev " + sci(worst) + " over 1/2/4 head shards (tol 1e-12)";
  return worst <= 1e-12;
}

// 5. Muon scale invariance, orthogonal equivariance, singular-value envelope.
bool crit_muon(std::string& detail) {
  // Scalar sweep of phi^5 over (0, 1].
  double lo = 1e300, hi = 0.0;
  const int n = 200000;
  for (int i = 1; i <= n; ++i) {
    const double m = oracle::phi_iter(static_cast<double>(i) / n, 5);
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  for (double s = 1e-12; s < 1.0 / n; s *= 10.0) lo = std::min(lo, oracle::phi_iter(s, 5));

  double worst_scale = 0.0, worst_equiv = 0.0;
  bool envelope_ok = true;
  double env_lo_seen = 1e300, env_hi_seen = 0.0;

  for (std::uint64_t i = 0; i < 50; ++i) {
    auto rng = make_rng(500 + i);
    const Index rows = 2 + static_cast<Index>(mix64(i) % 63);       // up to 64
    const Index cols = 2 + static_cast<Index>(mix64(i + 99) % 63);  // up to 64
    const Md g = gaussian_mat<double>(rng, rows, cols, 1.0);
    const Md base = muon_orthogonalize(g);

    for (double alpha : {1e-3, 1.0, 1e3}) {
      const Md scaled = muon_orthogonalize<double>(alpha * g);
      worst_scale = std::max(worst_scale, (scaled - base).cwiseAbs().maxCoeff());
    }

    Eigen::JacobiSVD<Md> svd(base);
    const Vd s = svd.singularValues();
    env_lo_seen = std::min(env_lo_seen, s.minCoeff());
    env_hi_seen = std::max(env_hi_seen, s.maxCoeff());
    envelope_ok = envelope_ok && s.maxCoeff() <= hi + 1e-6 && s.minCoeff() >= lo - 1e-6;
  }

  for (std::uint64_t i = 0; i < 5; ++i) {
    auto rng = make_rng(600 + i);
    const Md g = gaussian_mat<double>(rng, 12, 9, 1.0);
    Eigen::HouseholderQR<Md> ql(gaussian_mat<double>(rng, 12, 12, 1.0));
    Eigen::HouseholderQR<Md> qr(gaussian_mat<double>(rng, 9, 9, 1.0));
    const Md qmat = ql.householderQ() * Md::Identity(12, 12);
    const Md rmat = qr.householderQ() * Md::Identity(9, 9);
    const Md lhs = muon_orthogonalize<double>(qmat * g * rmat);
    const Md rhs = qmat * muon_orthogonalize(g) * rmat;
    worst_equiv = std::max(worst_equiv, (lhs - rhs).cwiseAbs().maxCoeff());
  }

  detail = "scale dev " + sci(worst_scale) + " (1e-10), equiv dev " + sci(worst_equiv) +
           " (1e-6), sv in [" + sci(env_lo_seen) + ", " + sci(env_hi_seen) + "] vs sweep [" +
           sci(lo) + ", " + sci(hi) + "]";
  return worst_scale < 1e-10 && worst_equiv < 1e-6 && envelope_ok;
}

// 6. Input-dimension slice norms preserved across a 100-update recall stream.
bool crit_norms(std::string& detail) {
  double worst = 0.0;
  for (UpdateRule rule : {UpdateRule::kGd, UpdateRule::kMomentum, UpdateRule::kMuon}) {
    auto rng = make_rng(77, static_cast<std::uint64_t>(rule));
    FastWeight<double> fw = init_fast_weight<double>(16, 24, rng);
    OptimizerState<double> st;
    st.rule = rule;
    const Index chunk = 8;
    for (int step = 0; step < 100; ++step) {
      const Md k = unit_gaussian_rows<double>(rng, chunk, 16);
      const Md v = unit_gaussian_rows<double>(rng, chunk, 16);
      const Md lr = Md::Constant(chunk, 3, 0.01);
      const FastWeight<double> before = fw;
      update_fast_weight(fw, chunk_gradient(fw, k, v, lr), st, 0.9);
      const auto check_cols = [&worst](const Md& now, const Md& was) {
        for (Index j = 0; j < now.cols(); ++j) {
          worst = std::max(worst, std::abs(now.col(j).norm() - was.col(j).norm()));
        }
      };
      check_cols(fw.w1, before.w1);
      check_cols(fw.w2, before.w2);
      check_cols(fw.w3, before.w3);
    }
  }
  detail = "max slice-norm drift " + sci(worst) + " over 100 steps x 3 rules (tol 1e-10)";
  return worst < 1e-10;
}

// 7. Perturbation-based dependency matrices equal dependency_mask cell for
// cell; shifted chunks plus an equal window union to the full causal mask.
bool crit_masks(std::string& detail) {
  const Index L = 24;
  int mismatches = 0;
  const std::vector<ChunkSchedule> scheds = {
      blockwise_causal(L, 5),
      blockwise_causal(L, 24),
      shifted_blockwise_causal(L, 6),
      strided({{0, 12}}, {{0, 12}, {12, 24}}, L),
      strided({{6, 12}, {18, 24}}, {{0, 6}, {6, 12}, {12, 18}, {18, 24}}, L),
  };
  for (size_t idx = 0; idx < scheds.size(); ++idx) {
    const BoolMat expected = dependency_mask(scheds[idx]);
    const BoolMat measured = perturbation_mask(scheds[idx], 8, 12, 90 + idx);
    for (Index i = 0; i < L; ++i)
      for (Index j = 0; j < L; ++j) mismatches += expected(i, j) != measured(i, j);
  }

  int union_mismatches = 0;
  const BoolMat rec = dependency_mask(shifted_blockwise_causal(12, 4));
  const BoolMat attn = attention_mask({WindowKind::kSlidingCausal, 4}, 12);
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 12; ++j) union_mismatches += (rec(i, j) || attn(i, j)) != (j <= i);

  detail = std::to_string(mismatches) + " perturbation mismatches, " +
           std::to_string(union_mismatches) + " union mismatches";
  return mismatches == 0 && union_mismatches == 0;
}

// 8. Window attention against the naive oracle.
bool crit_attention(std::string& detail) {
  auto rng = make_rng(123);
  const Index L = 20, hd = 8;
  const Md q = gaussian_mat<double>(rng, L, hd, 1.0);
  const Md k = gaussian_mat<double>(rng, L, hd, 1.0);
  const Md v = gaussian_mat<double>(rng, L, hd, 1.0);

  const Md wide = window_attention(q, k, v, {WindowKind::kSlidingCausal, L});
  const double dev = (wide - full_attention_oracle(q, k, v, true)).cwiseAbs().maxCoeff();
  const Md self = window_attention(q, k, v, {WindowKind::kSlidingCausal, 1});
  const bool exact_v = self == v;

  detail = "full-window dev " + sci(dev) + " (tol 1e-10), window-1 exact: " +
           (exact_v ? "yes" : "no");
  return dev < 1e-10 && exact_v;
}

// 9. Analytic model: ratio bound on a grid, FLOPs/state identity, Muon cost.
bool crit_perf_model(std::string& detail) {
  bool bound_ok = true;
  for (std::uint64_t h : {8u, 16u, 64u, 256u, 1024u, 4096u}) {
    for (std::uint64_t b : {1u, 2u, 16u, 64u, 512u, 4096u, 65536u, 1048576u}) {
      const double r = compute_memory_ratio(h, b);
      bound_ok = bound_ok && r <= std::min(static_cast<double>(h) / 2.0, static_cast<double>(b));
    }
  }
  bool identity_ok = true;
  for (std::uint64_t n : {1u, 3u, 1024u}) {
    for (std::uint64_t d : {32u, 768u}) {
      for (std::uint64_t nh : {1u, 4u}) {
        for (std::uint64_t r : {1u, 2u}) {
          identity_ok = identity_ok && ttt_flops(n, d, nh, r) == 6ull * n * state_size(d, nh, r);
        }
      }
    }
  }
  bool muon_ok = true;
  for (std::uint64_t nh : {1u, 2u, 8u}) {
    for (std::uint64_t hd : {16u, 64u, 768u}) {
      muon_ok = muon_ok && muon_flops(nh, hd, 1, 5) == 30ull * nh * hd * hd * hd;
    }
  }
  detail = std::string("ratio bound ") + (bound_ok ? "holds" : "violated") + ", FLOPs/state=6 " +
           (identity_ok ? "exact" : "violated") + ", Muon r=1 cost " +
           (muon_ok ? "exact" : "violated");
  return bound_ok && identity_ok && muon_ok;
}

// 10. Optimizer ordering on the shipped recall config.
bool crit_optimizer_trend(std::string& detail) {
  RecallTask task;
  task.num_pairs = 256;
  task.d = 32;
  task.dh = 64;
  task.nh = 1;
  task.chunk = 64;
  task.lr = 0.01;
  task.beta = 0.9;
  task.seeds = {1, 2, 3};
  const auto rows = run_optimizer_sweep(task);
  const auto& gd = rows[0].report.per_seed;
  const auto& mom = rows[1].report.per_seed;
  const auto& muon = rows[2].report.per_seed;

  bool muon_beats_gd = true;
  int muon_ge_mom = 0;
  for (size_t i = 0; i < 3; ++i) {
    muon_beats_gd = muon_beats_gd && muon[i].mean_cosine > gd[i].mean_cosine;
    muon_ge_mom += muon[i].mean_cosine >= mom[i].mean_cosine;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "muon %.3f/%.3f/%.3f gd %.3f/%.3f/%.3f mom %.3f/%.3f/%.3f",
                muon[0].mean_cosine, muon[1].mean_cosine, muon[2].mean_cosine, gd[0].mean_cosine,
                gd[1].mean_cosine, gd[2].mean_cosine, mom[0].mean_cosine, mom[1].mean_cosine,
                mom[2].mean_cosine);
  detail = buf;
  return muon_beats_gd && muon_ge_mom >= 2;
}

// 11. Recall non-decreasing in the fast-weight hidden size, majority of seeds.
bool crit_state_trend(std::string& detail) {
  RecallTask task;
  task.num_pairs = 512;
  task.d = 32;
  task.nh = 1;
  task.chunk = 64;
  task.rule = UpdateRule::kMuon;
  task.lr = 0.01;
  task.beta = 0.9;
  task.seeds = {1, 2, 3};
  const auto rows = run_state_sweep(task, {32, 64, 128});

  int monotone_seeds = 0;
  for (size_t s = 0; s < 3; ++s) {
    bool mono = true;
    for (size_t r = 1; r < rows.size(); ++r) {
      mono = mono && rows[r].report.per_seed[s].mean_cosine >=
                         rows[r - 1].report.per_seed[s].mean_cosine;
    }
    monotone_seeds += mono;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "dh32 %.3f dh64 %.3f dh128 %.3f (means), monotone in %d/3 seeds",
                rows[0].report.mean_cosine, rows[1].report.mean_cosine, rows[2].report.mean_cosine,
                monotone_seeds);
  detail = buf;
  return monotone_seeds >= 2;
}

// 12. Measured throughput rises with the chunk size; analytic column strictly
// increasing; at least 2x from b = 16 to b = 4096 at h = 512.
bool crit_throughput(std::string& detail) {
  BenchConfig bc;
  bc.hidden = 512;
  bc.measurements = 5;
  const auto points = throughput_bench<float>(bc, {16, 64, 256, 1024, 4096});

  bool ratio_increasing = true;
  bool in_noise_band = true;  // measured rate non-decreasing within 15%
  for (size_t i = 1; i < points.size(); ++i) {
    ratio_increasing = ratio_increasing && points[i].ratio > points[i - 1].ratio;
    in_noise_band = in_noise_band &&
                    points[i].measured_gflops >= 0.85 * points[i - 1].measured_gflops;
  }
  const double speedup = points.back().measured_gflops / points.front().measured_gflops;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "GFLOP/s %.2f @16 -> %.2f @4096 (%.2fx, need 2x), ratio column %s, band %s",
                points.front().measured_gflops, points.back().measured_gflops, speedup,
                ratio_increasing ? "increasing" : "NOT increasing",
                in_noise_band ? "ok" : "violated");
  detail = buf;
  return speedup >= 2.0 && ratio_increasing && in_noise_band;
}

}  // namespace

int main() {
  Eigen::setNbThreads(1);

  run({1, "gradient correctness", 5.0}, crit_gradient);
  run({2, "per-token reduction", 1.0}, crit_per_token);
  run({3, "CP equivalence", 5.0}, crit_cp);
  run({4, "TP equivalence", 5.0}, crit_tp);
  run({5, "Muon properties", 30.0}, crit_muon);
  run({6, "norm preservation", 60.0}, crit_norms);
  run({7, "mask semantics", 60.0}, crit_masks);
  run({8, "attention oracle", 5.0}, crit_attention);
  run({9, "analytic perf model", 5.0}, crit_perf_model);
  run({10, "optimizer trend", 60.0}, crit_optimizer_trend);
  run({11, "state-size trend", 120.0}, crit_state_trend);
  run({12, "throughput trend", 120.0}, crit_throughput);

  if (g_failures == 0) {
    std::printf("acceptance: all criteria passed\n");
  } else {
    std::printf("acceptance: %d criteria FAILED\n", g_failures);
  }
  return g_failures == 0 ? 0 : 1;
}
