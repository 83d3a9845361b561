// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "freqkv/model.hpp"
#include "freqkv/policy.hpp"
#include "freqkv/rope.hpp"

namespace freqkv {

// Streaming decoder over per-layer caches.  Every layer runs the same policy
// with the same schedule, so admission counts and compression events line up
// across layers; events() reports layer 0's.
//
// Chunked prefill and token-at-a-time decoding agree: chunks are split so no
// chunk straddles an eviction or compression, each chunk row attends the same
// rows a lone token would have seen.  For policies with bounded positions the
// rotary table is fixed at the cache window; for the others it grows with the
// stream (rebuilt tables agree bitwise on their shared prefix).
class DecodeSession {
 public:
  // `weights` must outlive the session and match `cfg`.
  DecodeSession(const ModelConfig& cfg, const WeightStore& weights, const PolicySpec& spec);

  // Feeds tokens and returns the logits after the final one.
  VectorF prefill(std::span<const std::int32_t> tokens);
  VectorF decode_step(std::int32_t token);

  // Greedy continuation: prefills the prompt, then samples argmax (lowest
  // index on ties) `new_tokens` times.  Returns only the generated ids.
  std::vector<std::int32_t> generate(std::span<const std::int32_t> prompt, Index new_tokens);

  // Feeds raw embedding rows ([chunk x hidden_dim]) instead of token ids;
  // the analysis paths use this to probe the caches with synthetic inputs.
  VectorF forward_embeddings(const Eigen::Ref<const MatrixF>& embeddings);

  const std::vector<CompressionEvent>& events() const { return policies_[0]->events(); }
  std::int64_t tokens_seen() const { return policies_[0]->tokens_seen(); }
  Index max_rope_position() const { return max_rope_position_; }
  Index max_cache_rows() const { return max_cache_rows_; }
  const CachePolicy& layer_cache(Index layer) const;
  const ModelConfig& config() const { return cfg_; }
  const PolicySpec& policy_spec() const { return spec_; }

 private:
  VectorF run_chunks(const Eigen::Ref<const MatrixF>& embeddings);
  void ensure_rope(Index position_limit);

  ModelConfig cfg_;
  const WeightStore* weights_;
  PolicySpec spec_;
  std::vector<std::unique_ptr<CachePolicy>> policies_;
  std::unique_ptr<RopeTable> rope_;
  MatrixF tied_head_;  // transposed embedding when cfg_.tie_output_head
  Index max_rope_position_ = -1;
  Index max_cache_rows_ = 0;
};

}  // namespace freqkv
