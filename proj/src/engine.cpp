// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#include "freqkv/engine.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "freqkv/attention.hpp"

namespace freqkv {

DecodeSession::DecodeSession(const ModelConfig& cfg, const WeightStore& weights,
                             const PolicySpec& spec)
    : cfg_(cfg), weights_(&weights), spec_(spec) {
  cfg_.validate();
  weights.validate_against(cfg_);
  policies_.reserve(cfg_.n_layers);
  for (Index i = 0; i < cfg_.n_layers; ++i)
    policies_.push_back(make_policy(spec_, cfg_.n_kv_heads, cfg_.head_dim));
  rope_ = std::make_unique<RopeTable>(cfg_.head_dim, std::max<Index>(spec_.cache.window, 2),
                                      cfg_.rope_base);
  if (cfg_.tie_output_head) tied_head_ = weights.get("tok_embed").transpose();
}

const CachePolicy& DecodeSession::layer_cache(Index layer) const {
  if (layer < 0 || layer >= static_cast<Index>(policies_.size()))
    throw std::out_of_range("layer_cache: layer " + std::to_string(layer) + " out of range");
  return *policies_[layer];
}

void DecodeSession::ensure_rope(Index position_limit) {
  if (position_limit <= rope_->max_positions()) return;
  if (policies_[0]->bounded_positions())
    throw std::logic_error("engine: a bounded policy requested positions past the window");
  Index capacity = rope_->max_positions();
  while (capacity < position_limit) capacity *= 2;
  rope_ = std::make_unique<RopeTable>(cfg_.head_dim, capacity, cfg_.rope_base);
}

VectorF DecodeSession::run_chunks(const Eigen::Ref<const MatrixF>& embeddings) {
  if (embeddings.rows() < 1) throw std::invalid_argument("engine: empty input");
  if (embeddings.cols() != cfg_.hidden_dim)
    throw std::invalid_argument("engine: embeddings must have hidden_dim columns");

  const AttentionConfig dims = cfg_.attention();
  VectorF last_hidden(cfg_.hidden_dim);
  Index at = 0;
  while (at < embeddings.rows()) {
    const Index admitted = policies_[0]->begin_chunk(embeddings.rows() - at);
    for (size_t l = 1; l < policies_.size(); ++l)
      if (policies_[l]->begin_chunk(embeddings.rows() - at) != admitted)
        throw std::logic_error("engine: cache policies disagree on admission");

    const bool original_positions = policies_[0]->caches_rotated_keys();
    const Index base = original_positions ? static_cast<Index>(policies_[0]->tokens_seen())
                                          : policies_[0]->rows();
    ensure_rope(base + admitted);
    max_rope_position_ = std::max(max_rope_position_, base + admitted - 1);

    MatrixF x = embeddings.middleRows(at, admitted);
    for (Index l = 0; l < cfg_.n_layers; ++l) {
      const std::string prefix = "layers." + std::to_string(l) + ".";
      const MatrixF normed = rmsnorm(x, weights_->get(prefix + "attn_norm"), cfg_.norm_eps);
      MatrixF k = normed * weights_->get(prefix + "wk");
      const MatrixF v = normed * weights_->get(prefix + "wv");
      {
        const MatrixF q = normed * weights_->get(prefix + "wq");
        const CacheView view = policies_[l]->view();
        const MatrixF attn = attend(dims, *rope_, &view, q, k, v, base);
        x += attn * weights_->get(prefix + "wo");
      }
      const MatrixF normed2 = rmsnorm(x, weights_->get(prefix + "ffn_norm"), cfg_.norm_eps);
      x += silu(normed2 * weights_->get(prefix + "w_gate"))
               .cwiseProduct(normed2 * weights_->get(prefix + "w_up")) *
           weights_->get(prefix + "w_down");

      if (original_positions) k = rope_->rotate(k, base);
      policies_[l]->append(KvTensorF(std::move(k), cfg_.n_kv_heads, cfg_.head_dim),
                           KvTensorF(v, cfg_.n_kv_heads, cfg_.head_dim));
    }
    max_cache_rows_ = std::max(max_cache_rows_, policies_[0]->rows());
    last_hidden = x.row(x.rows() - 1);
    at += admitted;
  }

  const MatrixF final_normed =
      rmsnorm(last_hidden.transpose(), weights_->get("final_norm"), cfg_.norm_eps);
  const MatrixF& head = cfg_.tie_output_head ? tied_head_ : weights_->get("lm_head");
  return (final_normed * head).transpose();
}

VectorF DecodeSession::prefill(std::span<const std::int32_t> tokens) {
  if (tokens.empty()) throw std::invalid_argument("prefill: empty token stream");
  const MatrixF& embed = weights_->get("tok_embed");
  MatrixF rows(static_cast<Index>(tokens.size()), cfg_.hidden_dim);
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= cfg_.vocab_size)
      throw std::invalid_argument("prefill: token " + std::to_string(tokens[i]) +
                                  " outside vocabulary of " + std::to_string(cfg_.vocab_size));
    rows.row(static_cast<Index>(i)) = embed.row(tokens[i]);
  }
  return run_chunks(rows);
}

VectorF DecodeSession::decode_step(std::int32_t token) {
  return prefill(std::span<const std::int32_t>(&token, 1));
}

VectorF DecodeSession::forward_embeddings(const Eigen::Ref<const MatrixF>& embeddings) {
  return run_chunks(embeddings);
}

std::vector<std::int32_t> DecodeSession::generate(std::span<const std::int32_t> prompt,
                                                  Index new_tokens) {
  if (new_tokens < 1) throw std::invalid_argument("generate: new_tokens must be positive");
  std::vector<std::int32_t> out;
  out.reserve(new_tokens);
  VectorF logits = prefill(prompt);
  for (Index i = 0; i < new_tokens; ++i) {
    Index best = 0;
    logits.maxCoeff(&best);  // first maximum: ties resolve to the lowest id
    out.push_back(static_cast<std::int32_t>(best));
    if (i + 1 < new_tokens) logits = decode_step(out.back());
  }
  return out;
}

}  // namespace freqkv
