// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#include "freqkv/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace freqkv {

void AttentionConfig::validate() const {
  if (n_heads < 1 || n_kv_heads < 1 || head_dim < 1)
    throw std::invalid_argument("attention config: head counts must be positive");
  if (n_heads % n_kv_heads != 0)
    throw std::invalid_argument("attention config: n_heads must be a multiple of n_kv_heads");
}

MatrixF attend(const AttentionConfig& dims, const RopeTable& rope, const CacheView* cache,
               const Eigen::Ref<const MatrixF>& queries,
               const Eigen::Ref<const MatrixF>& chunk_k,
               const Eigen::Ref<const MatrixF>& chunk_v, Index position_base) {
  dims.validate();
  if (rope.head_dim() != dims.head_dim)
    throw std::invalid_argument("attend: rope table head_dim does not match");
  const Index chunk = queries.rows();
  if (chunk < 1) throw std::invalid_argument("attend: empty chunk");
  if (queries.cols() != dims.n_heads * dims.head_dim)
    throw std::invalid_argument("attend: query width does not match n_heads * head_dim");
  if (chunk_k.cols() != dims.n_kv_heads * dims.head_dim ||
      chunk_v.cols() != dims.n_kv_heads * dims.head_dim)
    throw std::invalid_argument("attend: chunk width does not match n_kv_heads * head_dim");
  if (chunk_k.rows() != chunk || chunk_v.rows() != chunk)
    throw std::invalid_argument("attend: query and chunk lengths disagree");

  const Index cache_rows = cache ? cache->rows : 0;
  const Index base = position_base >= 0 ? position_base : cache_rows;

  // Assemble the visible keys and values: cache rows first (positions
  // 0..cache_rows-1), then the chunk (positions base..base+chunk-1).
  const Index total = cache_rows + chunk;
  MatrixF keys(total, dims.n_kv_heads * dims.head_dim);
  MatrixF values(total, dims.n_kv_heads * dims.head_dim);
  Index at = 0;
  if (cache) {
    for (const CacheSegment& seg : cache->segments) {
      if (seg.k.cols() != keys.cols() || seg.v.cols() != values.cols())
        throw std::invalid_argument("attend: cache width does not match n_kv_heads * head_dim");
      keys.middleRows(at, seg.k.rows()) =
          cache->keys_pre_rope ? rope.rotate(seg.k, at) : MatrixF(seg.k);
      values.middleRows(at, seg.v.rows()) = seg.v;
      at += seg.k.rows();
    }
    if (at != cache_rows) throw std::invalid_argument("attend: cache rows disagree with segments");
  }
  keys.middleRows(cache_rows, chunk) = rope.rotate(chunk_k, base);
  values.middleRows(cache_rows, chunk) = chunk_v;

  const MatrixF q_rot = rope.rotate(queries, base);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dims.head_dim));
  const Index group = dims.n_heads / dims.n_kv_heads;

  MatrixF out(chunk, dims.n_heads * dims.head_dim);
  for (Index h = 0; h < dims.n_heads; ++h) {
    const Index kv = h / group;
    const MatrixD k_h = keys.middleCols(kv * dims.head_dim, dims.head_dim).cast<double>();
    const MatrixD v_h = values.middleCols(kv * dims.head_dim, dims.head_dim).cast<double>();
    const MatrixD q_h = q_rot.middleCols(h * dims.head_dim, dims.head_dim).cast<double>();
    const MatrixD scores = scale * (q_h * k_h.transpose());  // [chunk x total]

    for (Index j = 0; j < chunk; ++j) {
      const Index visible = cache_rows + j + 1;  // every cache row plus chunk rows 0..j
      const auto row = scores.row(j).head(visible);
      const double peak = row.maxCoeff();
      VectorD weights = (row.transpose().array() - peak).exp();
      weights /= weights.sum();
      out.row(j).segment(h * dims.head_dim, dims.head_dim) =
          (weights.transpose() * v_h.topRows(visible)).cast<float>();
    }
  }
  return out;
}

}  // namespace freqkv
