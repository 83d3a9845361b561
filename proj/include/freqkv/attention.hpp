// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "freqkv/cache.hpp"
#include "freqkv/rope.hpp"
#include "freqkv/types.hpp"

namespace freqkv {

// Head layout of one attention call.  Query heads map onto kv heads in
// contiguous groups: query head h reads kv head h / (n_heads / n_kv_heads).
struct AttentionConfig {
  Index n_heads;
  Index n_kv_heads;
  Index head_dim;

  void validate() const;  // throws std::invalid_argument
};

// Causal grouped-query attention of a chunk of new tokens against a cache
// snapshot.  All inputs are pre-RoPE; rotation happens here so cached rows
// can re-anchor to cache-local positions after compression:
//   - cache row r sits at position r (rows 0..view->rows-1),
//   - chunk row j and query row j sit at position base + j, where base
//     defaults to the cache row count (pass position_base >= 0 to override,
//     e.g. to rotate at original stream positions),
//   - when the view carries keys_pre_rope == false its keys are used as
//     stored and only the chunk keys and queries are rotated.
// Chunk row j attends every cache row plus chunk rows 0..j.  Scores are
// scaled by 1/sqrt(head_dim); softmax runs in double with max subtraction.
// Returns the attended chunk, [C x n_heads*head_dim].
MatrixF attend(const AttentionConfig& dims, const RopeTable& rope, const CacheView* cache,
               const Eigen::Ref<const MatrixF>& queries,
               const Eigen::Ref<const MatrixF>& chunk_k,
               const Eigen::Ref<const MatrixF>& chunk_v, Index position_base = -1);

}  // namespace freqkv
