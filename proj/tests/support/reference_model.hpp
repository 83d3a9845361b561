// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// A from-scratch forward pass used to check the streaming engine.  It keeps
// no cache: every step recomputes causal attention over the whole prefix at
// positions 0..T-1 with plain loops.  Only the config and weight tensors are
// shared with the library; rotation, masking, softmax and normalization are
// all reimplemented here from the formulas.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

#include "freqkv/model.hpp"

namespace refmodel {

// Rotates channel pair (2j, 2j+1) of each head by pos / base^(2j/d).
inline void rotate_row(Eigen::RowVectorXf& row, freqkv::Index head_dim, double base,
                       freqkv::Index pos) {
  for (freqkv::Index h = 0; h < row.size() / head_dim; ++h)
    for (freqkv::Index j = 0; j < head_dim / 2; ++j) {
      const double angle = pos * std::pow(base, -2.0 * static_cast<double>(j) / head_dim);
      const float c = static_cast<float>(std::cos(angle));
      const float s = static_cast<float>(std::sin(angle));
      const float x = row[h * head_dim + 2 * j];
      const float y = row[h * head_dim + 2 * j + 1];
      row[h * head_dim + 2 * j] = x * c - y * s;
      row[h * head_dim + 2 * j + 1] = x * s + y * c;
    }
}

inline Eigen::MatrixXf norm_rows(const Eigen::MatrixXf& x, const Eigen::MatrixXf& gain,
                                 double eps) {
  Eigen::MatrixXf out = x;
  for (freqkv::Index r = 0; r < x.rows(); ++r) {
    double acc = 0.0;
    for (freqkv::Index c = 0; c < x.cols(); ++c) acc += double(x(r, c)) * double(x(r, c));
    const float inv = static_cast<float>(1.0 / std::sqrt(acc / x.cols() + eps));
    for (freqkv::Index c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) * gain(0, c) * inv;
  }
  return out;
}

// Logits after the last token of `tokens`.
inline Eigen::VectorXf forward_last_logits(const freqkv::ModelConfig& cfg,
                                           const freqkv::WeightStore& weights,
                                           const std::vector<std::int32_t>& tokens) {
  const freqkv::Index T = static_cast<freqkv::Index>(tokens.size());
  const freqkv::Index d = cfg.head_dim;
  const freqkv::Index group = cfg.n_heads / cfg.n_kv_heads;

  Eigen::MatrixXf x(T, cfg.hidden_dim);
  for (freqkv::Index t = 0; t < T; ++t) x.row(t) = weights.get("tok_embed").row(tokens[t]);

  for (freqkv::Index l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    const Eigen::MatrixXf normed = norm_rows(x, weights.get(p + "attn_norm"), cfg.norm_eps);
    Eigen::MatrixXf q = normed * weights.get(p + "wq");
    Eigen::MatrixXf k = normed * weights.get(p + "wk");
    const Eigen::MatrixXf v = normed * weights.get(p + "wv");
    for (freqkv::Index t = 0; t < T; ++t) {
      Eigen::RowVectorXf qr = q.row(t), kr = k.row(t);
      rotate_row(qr, d, cfg.rope_base, t);
      rotate_row(kr, d, cfg.rope_base, t);
      q.row(t) = qr;
      k.row(t) = kr;
    }

    Eigen::MatrixXf attn(T, cfg.q_channels());
    for (freqkv::Index t = 0; t < T; ++t)
      for (freqkv::Index h = 0; h < cfg.n_heads; ++h) {
        const freqkv::Index kv = h / group;
        std::vector<double> scores(t + 1);
        double peak = -1e300;
        for (freqkv::Index s = 0; s <= t; ++s) {
          double dot = 0.0;
          for (freqkv::Index c = 0; c < d; ++c)
            dot += double(q(t, h * d + c)) * double(k(s, kv * d + c));
          scores[s] = dot / std::sqrt(double(d));
          peak = std::max(peak, scores[s]);
        }
        double total = 0.0;
        for (double& sc : scores) total += (sc = std::exp(sc - peak));
        for (freqkv::Index c = 0; c < d; ++c) {
          double acc = 0.0;
          for (freqkv::Index s = 0; s <= t; ++s) acc += scores[s] / total * double(v(s, kv * d + c));
          attn(t, h * d + c) = static_cast<float>(acc);
        }
      }
    x += attn * weights.get(p + "wo");

    const Eigen::MatrixXf normed2 = norm_rows(x, weights.get(p + "ffn_norm"), cfg.norm_eps);
    const Eigen::MatrixXf gate = normed2 * weights.get(p + "w_gate");
    const Eigen::MatrixXf up = normed2 * weights.get(p + "w_up");
    Eigen::MatrixXf act(gate.rows(), gate.cols());
    for (freqkv::Index r = 0; r < gate.rows(); ++r)
      for (freqkv::Index c = 0; c < gate.cols(); ++c)
        act(r, c) = gate(r, c) / (1.0f + std::exp(-gate(r, c))) * up(r, c);
    x += act * weights.get(p + "w_down");
  }

  const Eigen::MatrixXf last = norm_rows(x.bottomRows(1), weights.get("final_norm"), cfg.norm_eps);
  if (cfg.tie_output_head)
    return (last * weights.get("tok_embed").transpose()).transpose();
  return (last * weights.get("lm_head")).transpose();
}

}  // namespace refmodel
