// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#include "freqkv/policy.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <utility>

namespace freqkv {

std::string to_string(PolicyTag tag) {
  switch (tag) {
    case PolicyTag::kFull: return "full";
    case PolicyTag::kDropping: return "dropping";
    case PolicyTag::kFreqKv: return "freqkv";
    case PolicyTag::kHighFreq: return "highfreq";
    case PolicyTag::kNoRescale: return "norescale";
    case PolicyTag::kPostRope: return "postrope";
  }
  throw std::invalid_argument("unknown policy tag");
}

PolicyTag parse_policy(const std::string& name) {
  for (PolicyTag tag : {PolicyTag::kFull, PolicyTag::kDropping, PolicyTag::kFreqKv,
                        PolicyTag::kHighFreq, PolicyTag::kNoRescale, PolicyTag::kPostRope})
    if (to_string(tag) == name) return tag;
  throw std::invalid_argument("unknown policy '" + name +
                              "' (expected full, dropping, freqkv, highfreq, norescale "
                              "or postrope)");
}

namespace {

// Append-only row storage with doubling growth, so unbounded policies stay
// linear in the stream length.
class RowBuffer {
 public:
  explicit RowBuffer(Index cols) : storage_(0, cols) {}

  Index rows() const { return rows_; }
  Eigen::Ref<const MatrixF> view() const { return storage_.topRows(rows_); }

  void append(const Eigen::Ref<const MatrixF>& block) {
    if (rows_ + block.rows() > storage_.rows()) {
      const Index grown = std::max<Index>(2 * storage_.rows(), rows_ + block.rows());
      storage_.conservativeResize(grown, Eigen::NoChange);
    }
    storage_.middleRows(rows_, block.rows()) = block;
    rows_ += block.rows();
  }

  void erase_front(Index n) {
    // Overlapping upward move; done per column to keep Eigen out of the
    // aliasing question.
    for (Index c = 0; c < storage_.cols(); ++c)
      std::memmove(storage_.col(c).data(), storage_.col(c).data() + n,
                   sizeof(float) * static_cast<size_t>(rows_ - n));
    rows_ -= n;
  }

 private:
  MatrixF storage_;
  Index rows_ = 0;
};

void check_block(const KvTensorF& k, const KvTensorF& v, Index kv_heads, Index head_dim) {
  if (k.n_heads != kv_heads || k.head_dim != head_dim || v.n_heads != kv_heads ||
      v.head_dim != head_dim)
    throw std::invalid_argument("policy append: head layout does not match");
  if (k.seq_len() != v.seq_len() || k.seq_len() < 1)
    throw std::invalid_argument("policy append: malformed block");
}

const std::vector<CompressionEvent> kNoEvents;

class FullPolicy final : public CachePolicy {
 public:
  FullPolicy(Index kv_heads, Index head_dim)
      : kv_heads_(kv_heads), head_dim_(head_dim), k_(kv_heads * head_dim),
        v_(kv_heads * head_dim) {}

  PolicyTag tag() const override { return PolicyTag::kFull; }
  Index begin_chunk(Index desired) override { return desired; }

  void append(const KvTensorF& k, const KvTensorF& v) override {
    check_block(k, v, kv_heads_, head_dim_);
    k_.append(k.data);
    v_.append(v.data);
  }

  CacheView view() const override {
    CacheView view;
    view.rows = k_.rows();
    if (view.rows > 0) view.segments.push_back({SegmentKind::kRecent, k_.view(), v_.view()});
    return view;
  }

  Index rows() const override { return k_.rows(); }
  std::int64_t tokens_seen() const override { return k_.rows(); }
  std::int64_t compression_count() const override { return 0; }
  const std::vector<CompressionEvent>& events() const override { return kNoEvents; }
  bool bounded_rows() const override { return false; }
  bool bounded_positions() const override { return false; }

 private:
  Index kv_heads_, head_dim_;
  RowBuffer k_, v_;
};

class DroppingPolicy final : public CachePolicy {
 public:
  DroppingPolicy(const CachePolicyConfig& cfg, Index kv_heads, Index head_dim)
      : cfg_(cfg), kv_heads_(kv_heads), head_dim_(head_dim),
        sink_k_(0, kv_heads * head_dim), sink_v_(0, kv_heads * head_dim),
        recent_k_(kv_heads * head_dim), recent_v_(kv_heads * head_dim) {
    cfg_.validate();
  }

  PolicyTag tag() const override { return PolicyTag::kDropping; }

  // Eviction interleaves with admission, so this policy feeds tokens through
  // one at a time; larger chunks would let rows be seen that a token-at-a-
  // time stream would already have dropped.
  Index begin_chunk(Index desired) override {
    if (desired < 1) throw std::invalid_argument("begin_chunk: desired must be positive");
    if (rows() >= cfg_.window) recent_k_.erase_front(1), recent_v_.erase_front(1);
    return 1;
  }

  void append(const KvTensorF& k, const KvTensorF& v) override {
    check_block(k, v, kv_heads_, head_dim_);
    Index at = 0;
    while (at < k.seq_len()) {
      if (tokens_seen_ < cfg_.sink_tokens) {
        const Index take = std::min<Index>(cfg_.sink_tokens - static_cast<Index>(tokens_seen_),
                                           k.seq_len() - at);
        const Index old = sink_k_.rows();
        sink_k_.conservativeResize(old + take, Eigen::NoChange);
        sink_v_.conservativeResize(old + take, Eigen::NoChange);
        sink_k_.middleRows(old, take) = k.data.middleRows(at, take);
        sink_v_.middleRows(old, take) = v.data.middleRows(at, take);
        tokens_seen_ += take;
        at += take;
        continue;
      }
      if (rows() >= cfg_.window) recent_k_.erase_front(1), recent_v_.erase_front(1);
      recent_k_.append(k.data.row(at));
      recent_v_.append(v.data.row(at));
      ++tokens_seen_;
      ++at;
    }
  }

  CacheView view() const override {
    CacheView view;
    view.rows = rows();
    if (sink_k_.rows() > 0) view.segments.push_back({SegmentKind::kSink, sink_k_, sink_v_});
    if (recent_k_.rows() > 0)
      view.segments.push_back({SegmentKind::kRecent, recent_k_.view(), recent_v_.view()});
    return view;
  }

  Index rows() const override { return sink_k_.rows() + recent_k_.rows(); }
  std::int64_t tokens_seen() const override { return tokens_seen_; }
  std::int64_t compression_count() const override { return 0; }
  const std::vector<CompressionEvent>& events() const override { return kNoEvents; }
  bool bounded_rows() const override { return true; }
  bool bounded_positions() const override { return true; }

 private:
  CachePolicyConfig cfg_;
  Index kv_heads_, head_dim_;
  std::int64_t tokens_seen_ = 0;
  MatrixF sink_k_, sink_v_;
  RowBuffer recent_k_, recent_v_;
};

class FreqPolicy final : public CachePolicy {
 public:
  FreqPolicy(PolicyTag tag, const CachePolicyConfig& cfg, Index kv_heads, Index head_dim)
      : tag_(tag), cache_(cfg, kv_heads, head_dim, kind_for(tag)) {}

  PolicyTag tag() const override { return tag_; }

  Index begin_chunk(Index desired) override {
    if (desired < 1) throw std::invalid_argument("begin_chunk: desired must be positive");
    record(cache_.settle());
    const Index room = cache_.config().window - cache_.rows();
    // Identity mode admits one token per cycle once saturated; append fires
    // the per-arrival identity compression itself.
    return std::max<Index>(1, std::min<Index>(desired, room));
  }

  void append(const KvTensorF& k, const KvTensorF& v) override { record(cache_.append(k, v)); }

  CacheView view() const override {
    CacheView view = cache_.view();
    if (tag_ == PolicyTag::kPostRope) view.keys_pre_rope = false;
    return view;
  }

  Index rows() const override { return cache_.rows(); }
  std::int64_t tokens_seen() const override { return cache_.tokens_seen(); }
  std::int64_t compression_count() const override { return cache_.compression_count(); }
  const std::vector<CompressionEvent>& events() const override { return events_; }
  bool bounded_rows() const override { return true; }
  bool bounded_positions() const override {
    return tag_ != PolicyTag::kPostRope && !cache_.config().identity_mode();
  }
  bool caches_rotated_keys() const override { return tag_ == PolicyTag::kPostRope; }

  const FreqKvCache& cache() const { return cache_; }

 private:
  static CompressKind kind_for(PolicyTag tag) {
    switch (tag) {
      case PolicyTag::kHighFreq: return CompressKind::kHighpass;
      case PolicyTag::kNoRescale: return CompressKind::kLowpassUnscaled;
      default: return CompressKind::kLowpass;
    }
  }

  void record(std::vector<CompressionEvent> fired) {
    events_.insert(events_.end(), fired.begin(), fired.end());
  }

  PolicyTag tag_;
  FreqKvCache cache_;
  std::vector<CompressionEvent> events_;
};

}  // namespace

std::unique_ptr<CachePolicy> make_policy(const PolicySpec& spec, Index kv_heads, Index head_dim) {
  if (kv_heads < 1 || head_dim < 1)
    throw std::invalid_argument("make_policy: kv_heads and head_dim must be positive");
  switch (spec.tag) {
    case PolicyTag::kFull:
      return std::make_unique<FullPolicy>(kv_heads, head_dim);
    case PolicyTag::kDropping:
      return std::make_unique<DroppingPolicy>(spec.cache, kv_heads, head_dim);
    case PolicyTag::kFreqKv:
    case PolicyTag::kHighFreq:
    case PolicyTag::kNoRescale:
    case PolicyTag::kPostRope:
      return std::make_unique<FreqPolicy>(spec.tag, spec.cache, kv_heads, head_dim);
  }
  throw std::invalid_argument("make_policy: unknown policy tag");
}

}  // namespace freqkv
