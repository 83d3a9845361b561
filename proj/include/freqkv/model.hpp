// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "freqkv/attention.hpp"
#include "freqkv/types.hpp"

namespace freqkv {

// Decoder-only transformer dimensions: pre-norm blocks with RMSNorm, rotary
// attention (grouped-query), a SiLU-gated feed-forward, and an untied or
// embedding-tied output head.
struct ModelConfig {
  Index vocab_size = 512;
  Index hidden_dim = 128;
  Index n_layers = 4;
  Index n_heads = 4;
  Index n_kv_heads = 2;
  Index head_dim = 32;
  Index ffn_dim = 352;
  double rope_base = 10000.0;
  double norm_eps = 1e-5;
  bool tie_output_head = false;

  void validate() const;  // throws std::invalid_argument
  Index q_channels() const { return n_heads * head_dim; }
  Index kv_channels() const { return n_kv_heads * head_dim; }
  AttentionConfig attention() const { return {n_heads, n_kv_heads, head_dim}; }

  // The bundled toy scale: small enough that full decodes take seconds.
  static ModelConfig desk();
  // 7B-class dimensions, used only by the analytic cost model.
  static ModelConfig reference_7b();
};

// Named dense tensors, kept in lexicographic name order.  Activations are row
// vectors, so a projection tensor maps [rows x in] * [in x out] -> [rows x out].
// Layout for an L-layer model:
//   tok_embed               [vocab_size x hidden_dim]
//   layers.<i>.attn_norm    [1 x hidden_dim]
//   layers.<i>.wq           [hidden_dim x n_heads*head_dim]
//   layers.<i>.wk, wv       [hidden_dim x n_kv_heads*head_dim]
//   layers.<i>.wo           [n_heads*head_dim x hidden_dim]
//   layers.<i>.ffn_norm     [1 x hidden_dim]
//   layers.<i>.w_gate, w_up [hidden_dim x ffn_dim]
//   layers.<i>.w_down       [ffn_dim x hidden_dim]
//   final_norm              [1 x hidden_dim]
//   lm_head                 [hidden_dim x vocab_size]   (absent when tied)
class WeightStore {
 public:
  // Deterministic initialization, reproducible bit for bit across runs and
  // platforms with IEEE doubles: draws come from mt19937_64 seeded with
  // `seed`, mapped through Box-Muller (u1, u2 from consecutive 53-bit
  // uniforms; both outputs of each pair are consumed in order).  Tensors are
  // filled in lexicographic name order, each in column-major element order.
  // Projections get std 1/sqrt(fan_in) where fan_in is the tensor's row
  // count, the embedding gets std 1, and norm gains are ones (no draws).
  static WeightStore random(const ModelConfig& cfg, std::uint64_t seed);

  const MatrixF& get(const std::string& name) const;  // throws std::out_of_range
  void put(std::string name, MatrixF tensor);
  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }
  const std::map<std::string, MatrixF>& tensors() const { return tensors_; }
  std::int64_t parameter_count() const;

  // Checks presence and shape of every tensor `cfg` requires.
  void validate_against(const ModelConfig& cfg) const;  // throws std::invalid_argument

 private:
  std::map<std::string, MatrixF> tensors_;
};

// Row-wise RMS normalization: row / sqrt(mean(row^2) + eps) * gain.
// `gain` is [1 x cols]; accumulation runs in double.
MatrixF rmsnorm(const Eigen::Ref<const MatrixF>& rows, const Eigen::Ref<const MatrixF>& gain,
                double eps);

// Elementwise x * sigmoid(x).
MatrixF silu(const Eigen::Ref<const MatrixF>& x);

}  // namespace freqkv
