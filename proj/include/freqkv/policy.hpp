// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "freqkv/cache.hpp"

namespace freqkv {

// Cache management strategies a decode session can run with.
enum class PolicyTag {
  kFull,      // keep everything; unbounded rows and positions
  kDropping,  // sinks + sliding window; evicts the oldest non-sink row
  kFreqKv,    // sinks + low-pass frequency summary (the default)
  kHighFreq,  // diagnostic: keeps the high band instead
  kNoRescale, // diagnostic: low-pass without the amplitude rescale
  kPostRope,  // diagnostic: low-pass over keys cached after rotation
};

std::string to_string(PolicyTag tag);
PolicyTag parse_policy(const std::string& name);  // throws std::invalid_argument

struct PolicySpec {
  PolicyTag tag = PolicyTag::kFreqKv;
  CachePolicyConfig cache;  // full ignores it; dropping uses window/sink_tokens
};

// One layer's cache behind a policy.  The engine drives it in a fixed cycle:
//   admitted = begin_chunk(desired);   // settle evictions/compressions
//   ... attend the admitted tokens against view() ...
//   append(k, v);                      // admitted rows, in order
// begin_chunk guarantees the returned count fits: for bounded policies
// rows() + admitted never exceeds the window, so cache-local positions stay
// inside [0, window).
class CachePolicy {
 public:
  virtual ~CachePolicy() = default;

  virtual PolicyTag tag() const = 0;
  virtual Index begin_chunk(Index desired) = 0;
  virtual void append(const KvTensorF& k, const KvTensorF& v) = 0;
  virtual CacheView view() const = 0;

  virtual Index rows() const = 0;
  virtual std::int64_t tokens_seen() const = 0;
  virtual std::int64_t compression_count() const = 0;
  // Every compression fired so far, oldest first.
  virtual const std::vector<CompressionEvent>& events() const = 0;

  virtual bool bounded_rows() const = 0;       // rows() stays <= window
  virtual bool bounded_positions() const = 0;  // rope positions stay < window
  // Post-rope caching: append() expects keys already rotated at their
  // original stream positions, and view() reports keys_pre_rope == false.
  virtual bool caches_rotated_keys() const { return false; }
};

std::unique_ptr<CachePolicy> make_policy(const PolicySpec& spec, Index kv_heads, Index head_dim);

}  // namespace freqkv
