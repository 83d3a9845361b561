// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#include "freqkv/cache.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "freqkv/spectral.hpp"

namespace freqkv {

void CachePolicyConfig::validate() const {
  if (window < 2) throw std::invalid_argument("cache config: window must be at least 2");
  if (sink_tokens < 0 || sink_tokens >= window)
    throw std::invalid_argument("cache config: sink_tokens must lie in [0, window)");
  if (!(gamma > 0.0) || gamma > 1.0)
    throw std::invalid_argument("cache config: gamma must lie in (0, 1]");
  if (retained() < 1)
    throw std::invalid_argument("cache config: gamma * (window - sink_tokens) rounds to zero");
  if (!identity_mode() && admission_chunk() < 1)
    throw std::invalid_argument("cache config: no admission room between compressions");
}

Index CachePolicyConfig::retained() const {
  return static_cast<Index>(std::floor(gamma * static_cast<double>(window - sink_tokens)));
}

Index CachePolicyConfig::admission_chunk() const {
  return window - retained() - sink_tokens;
}

std::int64_t expected_compressions(const CachePolicyConfig& cfg, std::int64_t tokens) {
  if (tokens <= cfg.window) return 0;
  if (cfg.identity_mode()) return tokens - cfg.window;
  return 1 + (tokens - cfg.window - 1) / cfg.admission_chunk();
}

MatrixF CacheView::concat_k() const {
  MatrixF out(rows, segments.empty() ? 0 : segments.front().k.cols());
  Index at = 0;
  for (const CacheSegment& s : segments) {
    out.middleRows(at, s.k.rows()) = s.k;
    at += s.k.rows();
  }
  return out;
}

MatrixF CacheView::concat_v() const {
  MatrixF out(rows, segments.empty() ? 0 : segments.front().v.cols());
  Index at = 0;
  for (const CacheSegment& s : segments) {
    out.middleRows(at, s.v.rows()) = s.v;
    at += s.v.rows();
  }
  return out;
}

namespace {

// Grows a row-major-in-time region in place.
void append_rows(MatrixF& dst, const Eigen::Ref<const MatrixF>& src) {
  const Index old_rows = dst.rows();
  dst.conservativeResize(old_rows + src.rows(), src.cols());
  dst.middleRows(old_rows, src.rows()) = src;
}

}  // namespace

FreqKvCache::FreqKvCache(CachePolicyConfig cfg, Index kv_heads, Index head_dim, CompressKind kind)
    : cfg_(cfg), kv_heads_(kv_heads), head_dim_(head_dim), kind_(kind) {
  cfg_.validate();
  if (kv_heads_ < 1 || head_dim_ < 1)
    throw std::invalid_argument("cache: kv_heads and head_dim must be positive");
  const Index cols = kv_heads_ * head_dim_;
  sink_k_.resize(0, cols);
  sink_v_.resize(0, cols);
  comp_k_.resize(0, cols);
  comp_v_.resize(0, cols);
  inc_k_.resize(0, cols);
  inc_v_.resize(0, cols);
}

void FreqKvCache::compress_non_sink() {
  const Index m = compressed_rows() + incoming_rows();
  const Index retain = static_cast<Index>(std::floor(cfg_.gamma * static_cast<double>(m)));

  KvTensorF block = KvTensorF::zero(m, kv_heads_, head_dim_);
  block.data.topRows(compressed_rows()) = comp_k_;
  block.data.bottomRows(incoming_rows()) = inc_k_;
  KvTensorF vblock = KvTensorF::zero(m, kv_heads_, head_dim_);
  vblock.data.topRows(compressed_rows()) = comp_v_;
  vblock.data.bottomRows(incoming_rows()) = inc_v_;

  switch (kind_) {
    case CompressKind::kLowpass:
      comp_k_ = compress_lowpass(block, retain).data;
      comp_v_ = compress_lowpass(vblock, retain).data;
      break;
    case CompressKind::kHighpass:
      comp_k_ = compress_highpass(block, retain).data;
      comp_v_ = compress_highpass(vblock, retain).data;
      break;
    case CompressKind::kLowpassUnscaled:
      comp_k_ = compress_lowpass_unscaled(block, retain).data;
      comp_v_ = compress_lowpass_unscaled(vblock, retain).data;
      break;
  }
  inc_k_.resize(0, inc_k_.cols());
  inc_v_.resize(0, inc_v_.cols());
  summary_end_ = tokens_seen_;
  ++compression_count_;
  pending_.push_back(CompressionEvent{tokens_seen_, sink_rows(), compressed_rows(),
                                      incoming_rows(), compression_count_});
}

void FreqKvCache::admit(const KvTensorF& k, const KvTensorF& v, Index first, Index count) {
  append_rows(inc_k_, k.data.middleRows(first, count));
  append_rows(inc_v_, v.data.middleRows(first, count));
  tokens_seen_ += count;
}

std::vector<CompressionEvent> FreqKvCache::append(const KvTensorF& k, const KvTensorF& v) {
  if (k.n_heads != kv_heads_ || k.head_dim != head_dim_ || v.n_heads != kv_heads_ ||
      v.head_dim != head_dim_)
    throw std::invalid_argument("cache append: head layout does not match the cache");
  if (k.seq_len() != v.seq_len())
    throw std::invalid_argument("cache append: key and value blocks disagree on length");
  if (k.seq_len() < 1) throw std::invalid_argument("cache append: empty block");

  pending_.clear();
  Index at = 0;
  const Index total = k.seq_len();
  while (at < total) {
    if (tokens_seen_ < cfg_.sink_tokens) {
      const Index take =
          std::min<Index>(cfg_.sink_tokens - static_cast<Index>(tokens_seen_), total - at);
      append_rows(sink_k_, k.data.middleRows(at, take));
      append_rows(sink_v_, v.data.middleRows(at, take));
      tokens_seen_ += take;
      at += take;
      continue;
    }
    // Lazy trigger: a full cache compresses only when the next token arrives.
    if (rows() >= cfg_.window) compress_non_sink();
    const Index room = cfg_.window - rows();
    const Index take = std::max<Index>(1, std::min<Index>(room, total - at));
    admit(k, v, at, take);
    at += take;
  }
  return std::exchange(pending_, {});
}

std::vector<CompressionEvent> FreqKvCache::settle() {
  pending_.clear();
  if (!cfg_.identity_mode() && rows() >= cfg_.window) compress_non_sink();
  return std::exchange(pending_, {});
}

CacheView FreqKvCache::view() const {
  CacheView view;
  view.rows = rows();
  view.keys_pre_rope = true;
  if (sink_rows() > 0) view.segments.push_back({SegmentKind::kSink, sink_k_, sink_v_});
  if (compressed_rows() > 0) view.segments.push_back({SegmentKind::kSummary, comp_k_, comp_v_});
  if (incoming_rows() > 0) view.segments.push_back({SegmentKind::kRecent, inc_k_, inc_v_});
  return view;
}

FreqKvCache::State FreqKvCache::to_state() const {
  return State{tokens_seen_, compression_count_, summary_end_,
               sink_k_,      sink_v_,            comp_k_,
               comp_v_,      inc_k_,             inc_v_};
}

FreqKvCache FreqKvCache::from_state(CachePolicyConfig cfg, Index kv_heads, Index head_dim,
                                    CompressKind kind, State state) {
  FreqKvCache cache(cfg, kv_heads, head_dim, kind);
  const Index cols = kv_heads * head_dim;
  for (const MatrixF* m : {&state.sink_k, &state.sink_v, &state.comp_k, &state.comp_v,
                           &state.inc_k, &state.inc_v})
    if (m->cols() != cols)
      throw std::invalid_argument("cache restore: region width " + std::to_string(m->cols()) +
                                  " does not match " + std::to_string(cols) + " channels");
  if (state.sink_k.rows() != state.sink_v.rows() || state.comp_k.rows() != state.comp_v.rows() ||
      state.inc_k.rows() != state.inc_v.rows())
    throw std::invalid_argument("cache restore: key/value regions disagree on length");
  if (state.sink_k.rows() > cfg.sink_tokens)
    throw std::invalid_argument("cache restore: sink region exceeds sink_tokens");
  if (state.tokens_seen < 0 || state.compression_count < 0)
    throw std::invalid_argument("cache restore: negative counters");
  cache.tokens_seen_ = state.tokens_seen;
  cache.compression_count_ = state.compression_count;
  cache.summary_end_ = state.summary_end;
  cache.sink_k_ = std::move(state.sink_k);
  cache.sink_v_ = std::move(state.sink_v);
  cache.comp_k_ = std::move(state.comp_k);
  cache.comp_v_ = std::move(state.comp_v);
  cache.inc_k_ = std::move(state.inc_k);
  cache.inc_v_ = std::move(state.inc_v);
  return cache;
}

}  // namespace freqkv
