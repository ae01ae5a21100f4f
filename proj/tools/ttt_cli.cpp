// Command-line front end: gradient checking, recall experiments, optimizer and
// state-size sweeps, the chunk-size throughput benchmark, parallel-equivalence
// checks, and the dependency-mask perturbation suite.

#include <Eigen/Core>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ttt/checks.hpp"
#include "ttt/config.hpp"
#include "ttt/layer.hpp"
#include "ttt/perf_model.hpp"
#include "ttt/recall.hpp"

using nlohmann::json;
using namespace ttt;

namespace {

constexpr const char* kSpecVersion = "1.0";

void write_output(const std::string& out_path, const std::string& payload) {
  if (out_path.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw ConfigError("cannot write output file: " + out_path);
  out << payload;
}

std::vector<std::uint64_t> task_seeds(const KeyValueConfig& cfg, std::uint64_t base_seed) {
  std::vector<std::uint64_t> seeds;
  for (const auto s : cfg.get_int_list("seeds", {})) seeds.push_back(static_cast<std::uint64_t>(s));
  if (seeds.empty()) {
    for (std::uint64_t i = 0; i < 3; ++i) seeds.push_back(base_seed + i);
  }
  return seeds;
}

RecallTask recall_task_from(const KeyValueConfig& cfg, std::uint64_t base_seed) {
  RecallTask t;
  t.num_pairs = cfg.get_int("num_pairs", 256);
  t.d = cfg.get_int("d", 32);
  t.dh = cfg.get_int("dh", 64);
  t.nh = cfg.get_int("nh", 1);
  t.chunk = cfg.get_int("chunk", 64);
  t.rule = rule_from_name(cfg.get_string("rule", "muon"));
  t.ns_iters = static_cast<int>(cfg.get_int("ns_iters", kDefaultNsIters));
  const std::string norm = cfg.get_string("norm_mode", "preserve");
  if (norm != "preserve" && norm != "unit") throw ConfigError("norm_mode must be preserve|unit");
  t.norm_mode = norm == "unit" ? NormMode::kUnit : NormMode::kPreserve;
  t.lr = cfg.get_double("lr", 0.01);
  t.beta = cfg.get_double("beta", 0.9);
  t.seeds = task_seeds(cfg, base_seed);
  return t;
}

json report_json(const RecallReport& r) {
  json per_seed = json::array();
  for (const auto& s : r.per_seed) {
    per_seed.push_back({{"seed", s.seed}, {"mean_cosine", s.mean_cosine}});
  }
  return {{"per_seed", per_seed}, {"mean_cosine", r.mean_cosine}};
}

json task_json(const RecallTask& t) {
  return {{"num_pairs", t.num_pairs}, {"d", t.d},   {"dh", t.dh},     {"nh", t.nh},
          {"chunk", t.chunk},         {"lr", t.lr}, {"beta", t.beta}, {"rule", rule_name(t.rule)}};
}

int cmd_gradcheck(const KeyValueConfig& cfg, std::uint64_t seed, const std::string& out) {
  GradCheckConfig gc;
  gc.d = cfg.get_int("d", 6);
  gc.dh = cfg.get_int("dh", 8);
  gc.l = cfg.get_int("l", 5);
  gc.num_seeds = static_cast<int>(cfg.get_int("num_seeds", 20));
  gc.step = cfg.get_double("step", 1e-5);
  gc.tol = cfg.get_double("tol", 1e-5);
  gc.base_seed = seed;
  const GradCheckResult res = run_gradcheck(gc);
  json j = {{"spec_version", kSpecVersion},
            {"d", gc.d},
            {"dh", gc.dh},
            {"l", gc.l},
            {"seeds_run", res.seeds_run},
            {"tol", gc.tol},
            {"max_rel_err", res.max_rel_err},
            {"pass", res.pass}};
  write_output(out, j.dump(2) + "\n");
  return res.pass ? 0 : 1;
}

int cmd_recall(const KeyValueConfig& cfg, std::uint64_t seed, const std::string& out) {
  const RecallTask t = recall_task_from(cfg, seed);
  json j = {{"spec_version", kSpecVersion}, {"task", task_json(t)}, {"report", report_json(run_recall(t))}};
  write_output(out, j.dump(2) + "\n");
  return 0;
}

int cmd_sweep_optim(const KeyValueConfig& cfg, std::uint64_t seed, const std::string& out) {
  const RecallTask base = recall_task_from(cfg, seed);
  json rows = json::array();
  for (const auto& row : run_optimizer_sweep(base)) {
    rows.push_back({{"rule", rule_name(row.rule)}, {"report", report_json(row.report)}});
  }
  json j = {{"spec_version", kSpecVersion}, {"task", task_json(base)}, {"rows", rows}};
  write_output(out, j.dump(2) + "\n");
  return 0;
}

int cmd_sweep_state(const KeyValueConfig& cfg, std::uint64_t seed, const std::string& out) {
  const RecallTask base = recall_task_from(cfg, seed);
  std::vector<Index> dh_list;
  for (const auto v : cfg.get_int_list("dh_list", {32, 64, 128})) dh_list.push_back(v);
  json rows = json::array();
  for (const auto& row : run_state_sweep(base, dh_list)) {
    rows.push_back({{"dh", row.dh},
                    {"state_size", 3 * row.dh * base.d / base.nh},
                    {"report", report_json(row.report)}});
  }
  json j = {{"spec_version", kSpecVersion}, {"task", task_json(base)}, {"rows", rows}};
  write_output(out, j.dump(2) + "\n");
  return 0;
}

int cmd_bench(const KeyValueConfig& cfg, std::uint64_t seed, Precision precision,
              const std::string& out, bool parallel) {
  BenchConfig bc;
  bc.hidden = cfg.get_int("hidden", 512);
  bc.nh = cfg.get_int("nh", 1);
  bc.r = cfg.get_int("r", 1);
  bc.measurements = static_cast<int>(cfg.get_int("measurements", 5));
  bc.min_time_s = cfg.get_double("min_time_s", 0.05);
  bc.seed = seed;
  std::vector<Index> chunks;
  for (const auto v : cfg.get_int_list("chunk_sizes", {16, 64, 256, 1024, 4096})) chunks.push_back(v);

  Eigen::setNbThreads(parallel ? 0 : 1);
  const auto points = precision == Precision::kSingle ? throughput_bench<float>(bc, chunks)
                                                      : throughput_bench<double>(bc, chunks);
  Eigen::setNbThreads(1);
  write_output(out, perf_points_csv(points));
  return 0;
}

int cmd_parallel_check(const KeyValueConfig& cfg, std::uint64_t seed, const std::string& out) {
  const UpdateRule rule = rule_from_name(cfg.get_string("rule", "muon"));
  ParallelCheckConfig pc;
  pc.rule = rule;
  pc.seed = seed;
  pc.cp_d = cfg.get_int("cp_d", pc.cp_d);
  pc.cp_dh = cfg.get_int("cp_dh", pc.cp_dh);
  pc.cp_tokens = cfg.get_int("cp_tokens", pc.cp_tokens);
  pc.d = cfg.get_int("d", pc.d);
  pc.nh = cfg.get_int("nh", pc.nh);
  pc.r = cfg.get_int("r", pc.r);
  pc.chunk = cfg.get_int("chunk", pc.chunk);
  pc.seq_len = cfg.get_int("seq_len", pc.seq_len);
  if (cfg.has("cp_shards")) {
    pc.cp_shards.clear();
    for (const auto s : cfg.get_int_list("cp_shards", {})) pc.cp_shards.push_back(s);
  }
  if (cfg.has("tp_shards")) {
    pc.tp_shards.clear();
    for (const auto s : cfg.get_int_list("tp_shards", {})) pc.tp_shards.push_back(s);
  }
  const ParallelCheckResult res = run_parallel_check(pc);
  const auto shard_json = [](const std::vector<ShardCheck>& v) {
    json arr = json::array();
    for (const auto& c : v) {
      arr.push_back({{"shards", c.shards}, {"max_rel_dev", c.max_rel_dev}, {"pass", c.pass}});
    }
    return arr;
  };
  json j = {{"spec_version", kSpecVersion},
            {"rule", rule_name(rule)},
            {"cp", shard_json(res.cp)},
            {"tp", shard_json(res.tp)},
            {"pass", res.pass}};
  write_output(out, j.dump(2) + "\n");
  return res.pass ? 0 : 1;
}

int cmd_maskcheck(const KeyValueConfig& cfg, std::uint64_t seed, const std::string& out) {
  const Index d = cfg.get_int("d", 8);
  const Index dh = cfg.get_int("dh", 12);
  const Index L = cfg.get_int("seq_len", 24);
  const Index chunk = cfg.get_int("chunk", 5);

  struct Case {
    std::string name;
    ChunkSchedule sched;
  };
  std::vector<Case> cases = {
      {"blockwise_causal", blockwise_causal(L, chunk)},
      {"shifted_blockwise_causal", shifted_blockwise_causal(L, chunk)},
      {"strided_prefix_update", strided({{0, L / 2}}, {{0, L / 2}, {L / 2, L}}, L)},
      {"strided_alternating",
       strided({{L / 4, L / 2}, {3 * L / 4, L}},
               {{0, L / 4}, {L / 4, L / 2}, {L / 2, 3 * L / 4}, {3 * L / 4, L}}, L)},
  };
  if (cfg.has("schedule_file")) {
    std::ifstream in(cfg.get_string("schedule_file", ""));
    if (!in) throw ConfigError("cannot open schedule file");
    std::stringstream buf;
    buf << in.rdbuf();
    cases.push_back({"from_file", ChunkSchedule::from_text(buf.str())});
  }

  bool all_pass = true;
  json rows = json::array();
  for (const auto& c : cases) {
    const Index n = c.sched.seq_len;
    const BoolMat expected = dependency_mask(c.sched);
    const BoolMat measured = perturbation_mask(c.sched, d, dh, seed);
    int mismatches = 0;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) mismatches += expected(i, j) != measured(i, j);
    all_pass = all_pass && mismatches == 0;
    rows.push_back({{"schedule", c.name}, {"seq_len", n}, {"mismatched_cells", mismatches},
                    {"pass", mismatches == 0}});
  }

  // Shifted chunks plus an equal-size sliding window must union to the full
  // causal mask.
  {
    const Index w = chunk;
    const BoolMat rec = dependency_mask(shifted_blockwise_causal(L, chunk));
    const BoolMat attn = attention_mask({WindowKind::kSlidingCausal, w}, L);
    int mismatches = 0;
    for (Index i = 0; i < L; ++i)
      for (Index j = 0; j < L; ++j) mismatches += (rec(i, j) || attn(i, j)) != (j <= i);
    all_pass = all_pass && mismatches == 0;
    rows.push_back({{"schedule", "shifted_plus_window_union"},
                    {"seq_len", L},
                    {"mismatched_cells", mismatches},
                    {"pass", mismatches == 0}});
  }

  json j = {{"spec_version", kSpecVersion}, {"cases", rows}, {"pass", all_pass}};
  write_output(out, j.dump(2) + "\n");
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  Eigen::setNbThreads(1);

  CLI::App app{"large-chunk test-time training toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::uint64_t seed = 1;
  std::string precision_name = "double";
  std::string config_path;
  std::string out_path;
  app.add_option("--seed", seed, "base 64-bit seed");
  app.add_option("--precision", precision_name, "single|double")
      ->check(CLI::IsMember({"single", "double"}));
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--out", out_path, "output path (stdout when omitted)");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  auto* recall = app.add_subcommand("recall", "key-value recall experiment");
  auto* sweep_optim = app.add_subcommand("sweep-optim", "recall under gd/momentum/muon");
  auto* sweep_state = app.add_subcommand("sweep-state", "recall across fast-weight sizes");
  auto* bench = app.add_subcommand("bench", "chunk-size throughput benchmark (CSV)");
  bool bench_parallel = false;
  bench->add_flag("--parallel", bench_parallel, "let the matmul use every core");
  auto* parallel_check = app.add_subcommand("parallel-check", "CP/TP equivalence report");
  auto* maskcheck = app.add_subcommand("maskcheck", "dependency-mask perturbation suite");

  CLI11_PARSE(app, argc, argv);

  try {
    const KeyValueConfig cfg =
        config_path.empty() ? KeyValueConfig::from_string("") : KeyValueConfig::from_file(config_path);
    const Precision precision =
        precision_name == "single" ? Precision::kSingle : Precision::kDouble;

    if (gradcheck->parsed()) return cmd_gradcheck(cfg, seed, out_path);
    if (recall->parsed()) return cmd_recall(cfg, seed, out_path);
    if (sweep_optim->parsed()) return cmd_sweep_optim(cfg, seed, out_path);
    if (sweep_state->parsed()) return cmd_sweep_state(cfg, seed, out_path);
    if (bench->parsed()) return cmd_bench(cfg, seed, precision, out_path, bench_parallel);
    if (parallel_check->parsed()) return cmd_parallel_check(cfg, seed, out_path);
    if (maskcheck->parsed()) return cmd_maskcheck(cfg, seed, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
