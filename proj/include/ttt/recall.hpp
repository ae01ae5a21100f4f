#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ttt/core.hpp"
#include "ttt/fast_weight.hpp"
#include "ttt/optim.hpp"
#include "ttt/random.hpp"
#include "ttt/types.hpp"

namespace ttt {

// Key-value memorization task: stream unit-norm Gaussian (k, v) pairs through
// update-only chunks, then read every stored key back and score the cosine
// between the read-out and its value. Learning rate and momentum coefficient
// are task constants so optimizer comparisons are not confounded by learned
// projections.
struct RecallTask {
  Index num_pairs = 256;
  Index d = 32;    // key/value dim
  Index dh = 64;   // fast-weight hidden dim per head
  Index nh = 1;    // heads; must divide d
  Index chunk = 64;
  UpdateRule rule = UpdateRule::kMuon;
  int ns_iters = kDefaultNsIters;
  NormMode norm_mode = NormMode::kPreserve;  // kUnit for the unit-norm rescale variant
  double lr = 0.01;
  double beta = 0.9;  // chunk momentum coefficient (momentum / muon rules)
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  void validate() const {
    if (num_pairs < 1) throw ConfigError("recall: need at least one pair");
    if (nh < 1 || d % nh != 0) throw ConfigError("recall: head count must divide dim");
    if (chunk < 1) throw ConfigError("recall: chunk must be >= 1");
    if (lr < 0) throw ConfigError("recall: negative learning rate");
    if (beta < 0 || beta > 1) throw ConfigError("recall: beta outside [0, 1]");
    if (seeds.empty()) throw ConfigError("recall: no seeds");
  }
};

struct SeedRecall {
  std::uint64_t seed = 0;
  double mean_cosine = 0.0;
};

struct RecallReport {
  std::vector<SeedRecall> per_seed;
  double mean_cosine = 0.0;
};

namespace detail {

template <class Scalar>
double cosine_rows_mean(const Mat<Scalar>& a, const Mat<Scalar>& b) {
  double acc = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    const double na = a.row(i).norm();
    const double nb = b.row(i).norm();
    const double denom = na * nb;
    acc += denom > 0 ? static_cast<double>(a.row(i).dot(b.row(i))) / denom : 0.0;
  }
  return acc / static_cast<double>(a.rows());
}

}  // namespace detail

template <class Scalar = double>
RecallReport run_recall(const RecallTask& task) {
  task.validate();
  const Index hd = task.d / task.nh;

  RecallReport report;
  for (const std::uint64_t seed : task.seeds) {
    auto rng_keys = make_rng(seed, 0);
    auto rng_vals = make_rng(seed, 1);
    const Mat<Scalar> keys = unit_gaussian_rows<Scalar>(rng_keys, task.num_pairs, task.d);
    const Mat<Scalar> values = unit_gaussian_rows<Scalar>(rng_vals, task.num_pairs, task.d);
    for (Index i = 0; i < task.num_pairs; ++i) {
      for (Index j = i + 1; j < task.num_pairs; ++j) {
        if (keys.row(i) == keys.row(j)) throw ConfigError("recall: duplicate keys generated");
      }
    }

    Mat<Scalar> readout(task.num_pairs, task.d);
    for (Index h = 0; h < task.nh; ++h) {
      auto rng_fw = make_rng(seed, 16 + static_cast<std::uint64_t>(h));
      FastWeight<Scalar> fw = init_fast_weight<Scalar>(hd, task.dh, rng_fw);
      OptimizerState<Scalar> st;
      st.rule = task.rule;
      st.ns_iters = task.ns_iters;
      st.norm_mode = task.norm_mode;

      const Mat<Scalar> kh = keys.middleCols(h * hd, hd);
      const Mat<Scalar> vh = values.middleCols(h * hd, hd);
      for (Index b = 0; b < task.num_pairs; b += task.chunk) {
        const Index n = std::min(task.chunk, task.num_pairs - b);
        const Mat<Scalar> lr = Mat<Scalar>::Constant(n, 3, Scalar(task.lr));
        const FwGrads<Scalar> g =
            chunk_gradient<Scalar>(fw, Mat<Scalar>(kh.middleRows(b, n)),
                                   Mat<Scalar>(vh.middleRows(b, n)), lr);
        update_fast_weight(fw, g, st, Scalar(task.beta));
      }
      readout.middleCols(h * hd, hd) = apply_fw(fw, kh);
    }

    report.per_seed.push_back({seed, detail::cosine_rows_mean(readout, values)});
  }

  double acc = 0.0;
  for (const auto& s : report.per_seed) acc += s.mean_cosine;
  report.mean_cosine = acc / static_cast<double>(report.per_seed.size());
  return report;
}

struct OptimizerSweepRow {
  UpdateRule rule;
  RecallReport report;
};

// Same task under gd / momentum / muon.
template <class Scalar = double>
std::vector<OptimizerSweepRow> run_optimizer_sweep(const RecallTask& base) {
  std::vector<OptimizerSweepRow> rows;
  for (const UpdateRule rule : {UpdateRule::kGd, UpdateRule::kMomentum, UpdateRule::kMuon}) {
    RecallTask t = base;
    t.rule = rule;
    rows.push_back({rule, run_recall<Scalar>(t)});
  }
  return rows;
}

struct StateSweepRow {
  Index dh;
  RecallReport report;
};

// Same task at varying fast-weight hidden dims (state sizes).
template <class Scalar = double>
std::vector<StateSweepRow> run_state_sweep(const RecallTask& base, const std::vector<Index>& dh_list) {
  std::vector<StateSweepRow> rows;
  for (const Index dh : dh_list) {
    RecallTask t = base;
    t.dh = dh;
    rows.push_back({dh, run_recall<Scalar>(t)});
  }
  return rows;
}

const char* rule_name(UpdateRule rule);
UpdateRule rule_from_name(const std::string& name);

}  // namespace ttt
