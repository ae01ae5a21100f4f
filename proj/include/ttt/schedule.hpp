#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ttt/types.hpp"

namespace ttt {

enum class ChunkMode { kUpdateThenApply, kApplyThenUpdate, kUpdateOnly, kApplyOnly };

const char* mode_name(ChunkMode m);
ChunkMode mode_from_name(const std::string& name);

inline bool mode_updates(ChunkMode m) { return m != ChunkMode::kApplyOnly; }
inline bool mode_applies(ChunkMode m) { return m != ChunkMode::kUpdateOnly; }

// Half-open token range with an execution mode.
struct ChunkOp {
  ChunkMode mode;
  Index begin = 0;
  Index end = 0;
};

// Ordered update/apply program over a sequence. Valid schedules apply every
// token exactly once and never update a token range twice.
struct ChunkSchedule {
  std::vector<ChunkOp> ops;
  Index seq_len = 0;

  // Throws ConfigError when ranges are malformed, apply ranges overlap or
  // fail to cover [0, seq_len), or update ranges overlap.
  void validate() const;

  std::string to_text() const;
  static ChunkSchedule from_text(const std::string& text);
};

// One update-then-apply op per chunk (block-wise causal pattern). A chunk
// larger than the sequence degenerates to a single full-sequence chunk; a
// trailing remainder chunk is kept as-is.
ChunkSchedule blockwise_causal(Index seq_len, Index chunk);

// Apply-then-update per chunk; the first chunk reads the initial fast weight.
ChunkSchedule shifted_blockwise_causal(Index seq_len, Index chunk);

using IndexRange = std::pair<Index, Index>;

// update_only ops for update_ranges and apply_only ops for apply_ranges,
// merged in begin order (updates first on ties).
ChunkSchedule strided(const std::vector<IndexRange>& update_ranges,
                      const std::vector<IndexRange>& apply_ranges, Index seq_len);

// Entry (i, j) is true iff token j's key/value influenced the fast weight in
// effect when token i was applied.
BoolMat dependency_mask(const ChunkSchedule& s);

}  // namespace ttt
