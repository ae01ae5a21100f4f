#include "ttt/schedule.hpp"

#include <algorithm>
#include <sstream>

namespace ttt {

const char* mode_name(ChunkMode m) {
  switch (m) {
    case ChunkMode::kUpdateThenApply: return "update_then_apply";
    case ChunkMode::kApplyThenUpdate: return "apply_then_update";
    case ChunkMode::kUpdateOnly: return "update_only";
    case ChunkMode::kApplyOnly: return "apply_only";
  }
  return "?";
}

ChunkMode mode_from_name(const std::string& name) {
  if (name == "update_then_apply") return ChunkMode::kUpdateThenApply;
  if (name == "apply_then_update") return ChunkMode::kApplyThenUpdate;
  if (name == "update_only") return ChunkMode::kUpdateOnly;
  if (name == "apply_only") return ChunkMode::kApplyOnly;
  throw ConfigError("unknown schedule mode: " + name);
}

namespace {

void check_disjoint_ranges(std::vector<IndexRange> ranges, const char* kind) {
  std::sort(ranges.begin(), ranges.end());
  for (size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].first < ranges[i - 1].second) {
      throw ConfigError(std::string("schedule: overlapping ") + kind + " ranges");
    }
  }
}

}  // namespace

void ChunkSchedule::validate() const {
  if (seq_len < 0) throw ConfigError("schedule: negative sequence length");
  std::vector<IndexRange> applies;
  std::vector<IndexRange> updates;
  for (const ChunkOp& op : ops) {
    if (!(0 <= op.begin && op.begin < op.end && op.end <= seq_len)) {
      throw ConfigError("schedule: op range outside [0, seq_len)");
    }
    if (mode_applies(op.mode)) applies.emplace_back(op.begin, op.end);
    if (mode_updates(op.mode)) updates.emplace_back(op.begin, op.end);
  }
  check_disjoint_ranges(updates, "update");

  std::sort(applies.begin(), applies.end());
  Index covered = 0;
  for (const auto& [b, e] : applies) {
    if (b != covered) throw ConfigError("schedule: apply ranges must tile [0, seq_len) exactly");
    covered = e;
  }
  if (covered != seq_len) {
    throw ConfigError("schedule: apply ranges must tile [0, seq_len) exactly");
  }
}

std::string ChunkSchedule::to_text() const {
  std::ostringstream os;
  for (const ChunkOp& op : ops) os << mode_name(op.mode) << ' ' << op.begin << ' ' << op.end << '\n';
  return os.str();
}

ChunkSchedule ChunkSchedule::from_text(const std::string& text) {
  ChunkSchedule s;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string mode;
    Index begin = 0, end = 0;
    if (!(ls >> mode >> begin >> end)) throw ConfigError("schedule: bad line: " + line);
    s.ops.push_back({mode_from_name(mode), begin, end});
    s.seq_len = std::max(s.seq_len, end);
  }
  s.validate();
  return s;
}

namespace {

ChunkSchedule chunked(Index seq_len, Index chunk, ChunkMode mode) {
  if (seq_len < 1) throw ConfigError("schedule: empty sequence");
  if (chunk < 1) throw ConfigError("schedule: chunk must be >= 1");
  ChunkSchedule s;
  s.seq_len = seq_len;
  for (Index b = 0; b < seq_len; b += chunk) {
    s.ops.push_back({mode, b, std::min(b + chunk, seq_len)});
  }
  return s;
}

}  // namespace

ChunkSchedule blockwise_causal(Index seq_len, Index chunk) {
  return chunked(seq_len, chunk, ChunkMode::kUpdateThenApply);
}

ChunkSchedule shifted_blockwise_causal(Index seq_len, Index chunk) {
  return chunked(seq_len, chunk, ChunkMode::kApplyThenUpdate);
}

ChunkSchedule strided(const std::vector<IndexRange>& update_ranges,
                      const std::vector<IndexRange>& apply_ranges, Index seq_len) {
  check_disjoint_ranges(update_ranges, "update");
  check_disjoint_ranges(apply_ranges, "apply");

  ChunkSchedule s;
  s.seq_len = seq_len;
  for (const auto& [b, e] : update_ranges) s.ops.push_back({ChunkMode::kUpdateOnly, b, e});
  for (const auto& [b, e] : apply_ranges) s.ops.push_back({ChunkMode::kApplyOnly, b, e});
  std::stable_sort(s.ops.begin(), s.ops.end(), [](const ChunkOp& a, const ChunkOp& b) {
    if (a.begin != b.begin) return a.begin < b.begin;
    // An update that starts where an apply starts feeds it.
    return mode_updates(a.mode) && !mode_updates(b.mode);
  });
  s.validate();
  return s;
}

BoolMat dependency_mask(const ChunkSchedule& s) {
  s.validate();
  BoolMat mask = BoolMat::Constant(s.seq_len, s.seq_len, false);
  std::vector<bool> updated(static_cast<size_t>(s.seq_len), false);
  for (const ChunkOp& op : s.ops) {
    if (op.mode == ChunkMode::kUpdateThenApply || op.mode == ChunkMode::kUpdateOnly) {
      for (Index j = op.begin; j < op.end; ++j) updated[static_cast<size_t>(j)] = true;
    }
    if (mode_applies(op.mode)) {
      for (Index i = op.begin; i < op.end; ++i)
        for (Index j = 0; j < s.seq_len; ++j) mask(i, j) = updated[static_cast<size_t>(j)];
    }
    if (op.mode == ChunkMode::kApplyThenUpdate) {
      for (Index j = op.begin; j < op.end; ++j) updated[static_cast<size_t>(j)] = true;
    }
  }
  return mask;
}

}  // namespace ttt
