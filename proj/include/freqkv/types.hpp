// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace freqkv {

using Index = Eigen::Index;

// Column-major throughout: a (head, channel) time series is one contiguous
// column, which is the access pattern the spectral ops care about.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;
using VectorF = Vector<float>;
using VectorD = Vector<double>;

// One cache region (or one streamed block) of keys or values:
// rows are timesteps, columns are the flattened (kv head, channel) pairs.
// Column h*head_dim + c holds channel c of head h.
template <typename Scalar>
struct KvTensor {
  Matrix<Scalar> data;  // [seq_len x (n_heads * head_dim)]
  Index n_heads = 0;
  Index head_dim = 0;

  KvTensor() = default;
  KvTensor(Matrix<Scalar> values, Index heads, Index dim)
      : data(std::move(values)), n_heads(heads), head_dim(dim) {
    if (n_heads < 1 || head_dim < 1)
      throw std::invalid_argument("KvTensor: head counts must be positive");
    if (data.cols() != n_heads * head_dim)
      throw std::invalid_argument("KvTensor: data has " + std::to_string(data.cols()) +
                                  " columns, expected " + std::to_string(n_heads * head_dim));
  }

  static KvTensor zero(Index seq_len, Index heads, Index dim) {
    return KvTensor(Matrix<Scalar>::Zero(seq_len, heads * dim), heads, dim);
  }

  Index seq_len() const { return data.rows(); }
  Index channels() const { return data.cols(); }

  auto head(Index h) { return data.middleCols(h * head_dim, head_dim); }
  auto head(Index h) const { return data.middleCols(h * head_dim, head_dim); }
};

using KvTensorF = KvTensor<float>;
using KvTensorD = KvTensor<double>;

}  // namespace freqkv
