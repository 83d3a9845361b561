// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "freqkv/types.hpp"

namespace freqkv {

// Sizing rules for a bounded KV cache with frequency-domain summarization.
// `window` (N) is the row budget, `sink_tokens` (S) pins the first S tokens
// verbatim, and `gamma` sets the summary length L = floor(gamma * (N - S)).
// gamma == 1.0 is a degenerate diagnostic mode: the "summary" is an identity
// transform of the whole non-sink region, so the cache grows without bound
// and compresses on every arrival once full.
struct CachePolicyConfig {
  Index window = 4096;
  Index sink_tokens = 4;
  double gamma = 0.5;

  void validate() const;          // throws std::invalid_argument on bad sizing
  Index retained() const;         // L
  Index admission_chunk() const;  // N - L - S; tokens admitted between events (gamma < 1)
  bool identity_mode() const { return gamma == 1.0; }
};

// Closed-form number of compression events after streaming `tokens` tokens
// into a cache configured with `cfg`, one arrival at a time.  Compression is
// lazy: the cache fills to N rows and the event fires only when the next
// token arrives, so a stream of exactly N tokens sees no event.
std::int64_t expected_compressions(const CachePolicyConfig& cfg, std::int64_t tokens);

// What happened at one compression: how many tokens had been admitted when
// the event fired and the region sizes immediately afterwards.
struct CompressionEvent {
  std::int64_t tokens_seen = 0;
  Index sink_rows = 0;
  Index compressed_rows = 0;
  Index incoming_rows = 0;
  std::int64_t generation = 0;  // 1-based event index
};

// Which band the cache keeps when it compresses.
enum class CompressKind {
  kLowpass,          // keep low frequencies, amplitude-rescaled
  kHighpass,         // keep high frequencies (diagnostic)
  kLowpassUnscaled,  // low frequencies without the rescale (diagnostic)
};

enum class SegmentKind { kSink, kSummary, kRecent };

// A read-only window onto one cache region.  The refs alias cache storage and
// stay valid until the next mutating call on the owning cache.
struct CacheSegment {
  SegmentKind kind;
  Eigen::Ref<const MatrixF> k;
  Eigen::Ref<const MatrixF> v;
};

// Ordered, gap-free snapshot of cache contents.  Row r across the
// concatenated segments is cache position r; positions run 0..rows-1.
// Keys are stored before rotary embedding unless a policy says otherwise.
struct CacheView {
  std::vector<CacheSegment> segments;
  Index rows = 0;
  bool keys_pre_rope = true;

  // Materializes the concatenation; handy for tests and serialization.
  MatrixF concat_k() const;
  MatrixF concat_v() const;
};

// One layer's key/value cache with sink pinning and on-arrival compression.
// Keys and values are appended pre-RoPE; rotation happens at attention time
// against cache-local positions, so compressed rows re-anchor cleanly.
class FreqKvCache {
 public:
  FreqKvCache(CachePolicyConfig cfg, Index kv_heads, Index head_dim,
              CompressKind kind = CompressKind::kLowpass);

  // Admits seq_len(k) tokens in order.  Both tensors must agree on shape and
  // match the cache's head layout.  Returns the compressions fired while
  // admitting, oldest first; appending row blocks is exactly equivalent to
  // appending the same rows one call at a time.
  std::vector<CompressionEvent> append(const KvTensorF& k, const KvTensorF& v);

  // Compress now if an arrival would trigger anyway (the cache is at its row
  // budget).  Lets callers settle the cache before reading a view that the
  // next token will attend to.  No-op in identity mode and below budget.
  std::vector<CompressionEvent> settle();

  CacheView view() const;

  Index rows() const { return sink_rows() + compressed_rows() + incoming_rows(); }
  Index sink_rows() const { return sink_k_.rows(); }
  Index compressed_rows() const { return comp_k_.rows(); }
  Index incoming_rows() const { return inc_k_.rows(); }

  std::int64_t tokens_seen() const { return tokens_seen_; }
  std::int64_t compression_count() const { return compression_count_; }

  // The summary region condenses source tokens [sink_tokens, summary_end).
  std::int64_t summary_end() const { return summary_end_; }

  const CachePolicyConfig& config() const { return cfg_; }
  Index kv_heads() const { return kv_heads_; }
  Index head_dim() const { return head_dim_; }
  CompressKind kind() const { return kind_; }

  // Full mutable state, for serialization.  Restoring a dumped state yields a
  // cache whose subsequent behavior is identical to the original's.
  struct State {
    std::int64_t tokens_seen = 0;
    std::int64_t compression_count = 0;
    std::int64_t summary_end = 0;
    MatrixF sink_k, sink_v, comp_k, comp_v, inc_k, inc_v;
  };
  State to_state() const;
  static FreqKvCache from_state(CachePolicyConfig cfg, Index kv_heads, Index head_dim,
                                CompressKind kind, State state);

 private:
  FreqKvCache() = default;
  void compress_non_sink();
  void admit(const KvTensorF& k, const KvTensorF& v, Index first, Index count);

  CachePolicyConfig cfg_;
  Index kv_heads_ = 0;
  Index head_dim_ = 0;
  CompressKind kind_ = CompressKind::kLowpass;

  std::int64_t tokens_seen_ = 0;
  std::int64_t compression_count_ = 0;
  std::int64_t summary_end_ = 0;

  MatrixF sink_k_, sink_v_;  // rows grow 0..S then freeze
  MatrixF comp_k_, comp_v_;  // rewritten wholesale at each compression
  MatrixF inc_k_, inc_v_;    // recent uncompressed tokens
  std::vector<CompressionEvent> pending_;  // scratch for append/settle
};

}  // namespace freqkv
